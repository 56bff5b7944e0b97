"""Check registry and JSON Schemas shipped as package data."""
