"""Tests for simplextrack package."""
