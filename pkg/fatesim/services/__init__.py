"""
Services module.
"""
