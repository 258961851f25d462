"""
Pydantic models for MTLRRC.
"""
