"""Gaussian core component for exact two-mode state algebra"""
