"""Tests for the phaseseg package."""
