"""Speech enhancement toolkit: BLSTM time-frequency masks, GEV beamforming,
mask distillation, and objective metrics. Thin wrapper over the C++ core."""

from ._core import (  # noqa: F401
    MaskNet,
    NumericalError,
    ValidationError,
    __version__,
    apply_beamformer,
    apply_mask,
    bce_loss,
    build_corpus,
    condition_psd,
    estimate_psd,
    estoi,
    gev_filter,
    grad_check_preset,
    ideal_binary_masks,
    istft,
    median_fuse,
    normalize_features,
    si_sdr,
    stft,
    stoi,
    synth_speech_like,
)
