"""Speech-based ON/OFF medication-state assessment toolkit.

Pipeline: energy-based speech/non-speech segmentation, GMM-UBM therapist
removal, acoustic feature extraction (MFCC, deltas, prosodic LLDs),
per-speaker feedforward classifiers, and a task-partitioned evaluation
protocol.  A parametric synthetic corpus with known ground truth acts as
the verification substrate.
"""

__version__ = "0.1.0"
