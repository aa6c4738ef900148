"""Gradual probabilistic lambda calculus."""
