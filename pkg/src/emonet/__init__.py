"""Back-propagation networks for classifying facial expressions from Motion-Unit features."""

from .dataset import CategoryScheme, Dataset, Emotion, Frame, LabeledSequence
from .evaluation import ConfusionMatrix, average_rate, confusion, evaluate, median_filter, normalize_output
from .network import Network, forward, init_weights, load_model, save_model, sigmoid, sigmoid_derivative
from .optim import line_minimize, powell_minimize, powell_train, simplex_minimize
from .training import HyperParams, TrainingDiverged, TrainingState, backprop_step, error, train

__version__ = "0.1.0"
