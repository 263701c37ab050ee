"""NLA component for measurement-based noiseless linear amplification"""
