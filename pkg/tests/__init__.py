"""Tests for the bayes-primer toolkit."""
