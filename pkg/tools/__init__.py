"""
Tools package for the fermion automaton.
Contains scripts for rendering trajectory figures and scanning packet widths.
"""
