"""Test suite for the fullstab package."""
