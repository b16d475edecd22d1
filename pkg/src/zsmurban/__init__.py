"""zsm-urban: a desk-scale laboratory for reliable set-based GNSS positioning
in urban canyons.

Pipeline: synthesize an urban scene and GPS-like measurements, train three
LOS/NLOS classifiers, gate satellites by unanimous voting with a confidence
threshold, refine a set-based receiver position by shadow matching, and report
reliability metrics (success rate, containment rate, position bounds).
"""

__version__ = "0.1.0"
