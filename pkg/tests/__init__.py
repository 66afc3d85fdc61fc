"""Tests for crutchgait."""
