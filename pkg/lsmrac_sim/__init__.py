"""
lsmrac_sim - command line simulator for least-squares adaptive robot tracking
"""

from lsmrac_sim.main import main, run

__all__ = ["main", "run"]
