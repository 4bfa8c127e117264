"""Tests for hyperscreen."""
