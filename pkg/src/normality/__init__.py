"""Normality component for moment statistics and Jarque-Bera testing"""
