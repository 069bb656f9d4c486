# # Full stability of parametric variational systems
# 
# A Python package to solve parametric variational systems of the form
# 
#     v ∈ f(x, p, q) + ∂ₓg(x, p)
# 
# with an affine base mapping `f(x, p, q) = c + Qx + Bp + Dq` and a prox-regular potential `g`, and to check whether the solution at a reference point is *fully stable*: whether the localized solution mapping stays single-valued and Lipschitz (or Hölder) continuous under both tilt perturbations `v` and parametric perturbations `(p, q)`.
# 
# The package provides:
# 
# - a proximal contraction solver, which refuses to iterate when the strong monotonicity modulus of `f` does not exceed the prox-parameter of `g` and probes the solution set instead;
# - the closed-form moduli of full stability together with sampled verifications of the Lipschitzian and Hölderian inequalities;
# - a certificate for variational conditions over smooth inequality systems, built on constraint qualifications (MFCQ, LICQ, CRCQ), the multiplier polytope and uniform second-order conditions;
# - pointbased second-order tests for variational inequalities over polyhedra and boxes, through coderivatives of normal cone mappings;
# - calculators for the threshold of prox-regularity of the supported potentials;
# - tangent, normal and critical cones of polyhedra, with their limits along the normal cone graph.
# 
# Instances are JSON documents, optionally compressed, and a few of them ship with the package.
# 
# ## Installation
# 
# To install the package, use `pip`:
# 
# ```bash
# pip install fullstab

# 
# ## Usage
# 
# Instances are loaded and validated from their files: the reference quadruple must solve the system.
# 
def test_line_31():
    import numpy as np
    from fullstab import load_instance, solve, SolveResult
    from fullstab.utils import fixture_path
    
    # A concave quadratic over the nonnegative orthant,
    # with strong monotonicity modulus 2 and threshold 1.
    instance = load_instance(fixture_path("ex72_sigma2"))
    
    result: SolveResult = solve(
        instance,
        v=np.array([0.7, 0.7]),
        p=np.zeros(2),
        q=np.zeros(2),
    )
    
    assert np.allclose(result.x, [0.7, 0.7], atol=1e-8)
    assert result.measured_rate <= result.alpha + 0.01

# 
# When the strong monotonicity modulus does not exceed the threshold of prox-regularity, the solver raises `NonContractiveRegime`, and the failure probe reports the shape of the solution set instead:
# 
def test_line_53():
    import numpy as np
    from fullstab import load_instance, solve_certified_failure_probe
    from fullstab.utils import fixture_path
    
    instance = load_instance(fixture_path("ex72_sigma1"))
    
    probe = solve_certified_failure_probe(
        instance, np.array([0.5, 0.5]), np.zeros(2), np.zeros(2)
    )
    assert probe.solution_set == "empty"

# 
# ### Moduli of full stability
# 
# The closed-form moduli are computed from the moduli of the instance, and the sampled verification measures the least constant of the full stability inequality on pairs of perturbations drawn around the reference point.
# 
def test_line_70():
    from fullstab import (
        load_instance,
        SampleConfig,
        verify_lipschitz_full_stability,
    )
    from fullstab.utils import fixture_path
    
    # A quasi-variational inequality whose constraint set moves with p
    instance = load_instance(fixture_path("aqvi1"))
    
    report = verify_lipschitz_full_stability(
        instance,
        SampleConfig(eta=1e-2, count=100, seed=42),
    )
    assert report.passed
    assert report.canonical_pass

# 
# ### Certificates for inequality systems
# 
# For potentials given by smooth inequality systems, the certificate combines the constraint qualifications with the uniform second-order condition. The pointwise route through the strong second-order condition is only decided when LICQ holds.
# 
def test_line_93():
    from fullstab import load_instance, certify_full_stability
    from fullstab.utils import fixture_path
    
    # Four affine constraints active at the origin of the three dimensional space
    instance = load_instance(fixture_path("ex94"))
    
    certificate = certify_full_stability(instance, count=100, seed=42)
    
    assert certificate.verdict == "FULLY_STABLE"
    assert certificate.checks["MFCQ"].holds
    assert not certificate.checks["LICQ"].holds
    assert certificate.routes["pointwise"] is None

# 
# ### Pointbased conditions
# 
# For box constrained instances the limiting second-order subdifferential is computed coordinate by coordinate, and for polyhedral variational inequalities the positive definiteness of the symmetrized Jacobian is tested on the span of the critical cone.
# 
def test_line_112():
    from fullstab import (
        load_instance,
        check_pointbased_lipschitz,
        pvi_positive_definiteness,
    )
    from fullstab.utils import fixture_path
    
    instance = load_instance(fixture_path("box"))
    
    assert check_pointbased_lipschitz(instance).holds
    assert pvi_positive_definiteness(instance, "critical-span").holds

# 
# ## Command Line Interface
# 
# The package also provides the `fullstab` command, with one subcommand per analysis. Every subcommand takes the `--instance` path, the `--seed` of the random procedures and the `--out` path of the report, which is otherwise printed to stdout as JSON. A short summary is printed to stderr.
# 
# ```bash
# fullstab solve --instance instance.json --v 0.7 0.7 --p 0 0 --q 0 0
# fullstab solve --instance instance.json --v 0.7 0.7 --starts 10 --delta 0.01
# fullstab certify-pvc --instance instance.json --samples 500
# fullstab certify-pvi --instance instance.json
# fullstab moduli --instance instance.json --samples 1000 --holder
# fullstab threshold --instance instance.json
# fullstab cones --instance instance.json --out cones.json.gz

# 
# With `--starts N`, `solve` also runs the iteration from N random starts within `--delta` of the reference point and reports whether the limits agree.
# 
# Each report comes with a manifest of the command, the seed, the tolerances and the explicitly provided overrides, together with a digest of these entries. Two runs with the same manifest print the same report. The wall-clock time is only recorded with the `--timing` flag.
# 
# The exit code is `0` on success, `1` on errors and on certificates that are not granted, and `2` when `solve` falls back to the failure probe.
# 
# ## License
# 
# This project is licensed under the MIT License.
