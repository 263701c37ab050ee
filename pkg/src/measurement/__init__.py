"""Measurement component for sampling homodyne and heterodyne shot records"""
