"""Criteria component for EPR and inseparability witnesses"""
