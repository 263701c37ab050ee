"""Storage component for binary shot record files"""
