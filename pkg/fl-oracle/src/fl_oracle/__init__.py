"""fl_oracle: real-data accuracy measurements behind the market simulator.

Partitions an image dataset to a requested (size, label-skew) pair,
trains a small convolutional network on the partition, and fits the
six-constant closed-form quality surface to measured accuracies.  Also
ships a line-delimited JSON server so other processes can use it as an
accuracy oracle.
"""

from .partition import PartitionError, label_emd, partition, target_histogram
from .fit import DegenerateFitError, FitResult, fit_dqi, quality_surface
from .model import ConvNet, train_and_eval

__version__ = "0.1.0"
