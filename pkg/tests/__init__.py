"""Test suite for the offramp package."""
