"""Config component for experiment recipes"""
