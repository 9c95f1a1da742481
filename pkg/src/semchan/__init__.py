"""Semantic channel analysis over ground Datalog knowledge bases."""
