#!/usr/bin/env python3

"""
ConvexLab
Finite element discretizations of convexity and subharmonicity constraints.
"""

__version__ = "1.0.0"
