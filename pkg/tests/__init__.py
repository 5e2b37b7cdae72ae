"""
vgan Test Suite

Unit tests per package plus an end-to-end desk-scale pipeline scenario.
"""
