"""Relay NOMA link analyzer test package."""
