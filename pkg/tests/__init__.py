"""Tests for sis_patch_analysis."""
