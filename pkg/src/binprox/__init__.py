"""binprox: binaural scene synthesis and coarse proximity/direction classification.

Pipeline modules:

* :mod:`binprox.labelspace` -- direction/proximity class schemes and frame targets
* :mod:`binprox.hrir` -- head-related impulse response databases
* :mod:`binprox.binsim` -- shoebox image-source simulation and binaural rendering
* :mod:`binprox.featex` -- interaural feature extraction (sin/cos IPD, ILD, magnitude)
* :mod:`binprox.neuralnet` -- from-scratch tensor layers with exact backprop
* :mod:`binprox.crnn` -- the classifier architecture and training loop
* :mod:`binprox.evaluation` -- octant fusion and segment-based F1
* :mod:`binprox.dataset` -- event corpora and dataset generation
* :mod:`binprox.cli` -- end-to-end pipeline driver
"""

__version__ = "0.1.0"
