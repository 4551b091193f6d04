#!/usr/bin/env python
"""
Main entry point for the lsmrac simulator.
"""

from lsmrac_sim import run

if __name__ == "__main__":
    run()
