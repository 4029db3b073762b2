"""Image quality harness: dataset degradation, quality metrics, experiments.

The package quantifies how controlled dataset degradations (compression,
quantization, noise, rescaling) move image quality metrics and downstream
task metrics.  Entry points:

- :mod:`iqharness.corpus` -- dataset discovery and annotation models
- :mod:`iqharness.sanity` -- dataset checking and repair
- :mod:`iqharness.stats` -- descriptive dataset statistics
- :mod:`iqharness.modifiers` -- degradation transforms producing derived datasets
- :mod:`iqharness.qmetrics` -- image quality metrics (PSNR, SSIM, SNR, sharpness)
- :mod:`iqharness.deteval` -- COCO-convention detection evaluation
- :mod:`iqharness.experiment` -- grid execution of an external task
- :mod:`iqharness.runstore` -- file-backed run records, queries, tables, plots
- :mod:`iqharness.cli` -- the ``iqh`` command line
"""
from __future__ import annotations

__version__ = "0.1.0"
