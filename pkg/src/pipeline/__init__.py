"""Pipeline component for orchestrating experiments and sweeps"""
