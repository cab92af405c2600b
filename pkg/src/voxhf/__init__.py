"""voxhf: longitudinal voice-biomarker pipeline.

Turns daily home voice recordings plus standard-of-care covariates into
lookback-window predictions of health deterioration, with repeated-measures
screening, subject-wise nested cross-validated random forests and exact
Shapley attributions. A built-in synthetic cohort generator serves as the
measurement oracle for the whole pipeline.
"""

from voxhf.audio import AudioBuffer, decode_wav, resample, write_wav

__all__ = ["AudioBuffer", "decode_wav", "resample", "write_wav"]
__version__ = "0.1.0"
