"""Particle-spring handkerchief spinning: cloth engine, drive strategies,
Poincare/Floquet analysis and tendon-driven wrist kinematics."""

__version__ = "0.1.0"
