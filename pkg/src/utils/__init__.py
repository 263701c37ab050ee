"""Utilities: error types and console output"""
