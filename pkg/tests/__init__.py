"""
Test suite for the MB-NLA simulator
"""
