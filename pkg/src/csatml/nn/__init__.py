from .functional import (batchnorm_forward, conv1d_forward, global_avg_pool, linear_forward,
                         relu, softmax, softmax_cross_entropy)
from .layers import (BatchNorm1d, Conv1d, Flatten, GlobalAvgPool, Linear, MaxPool1d, ReLU,
                     Sequential, backward)
from .optim import SGD, Adam, PlateauScheduler, adam_step, plateau_scheduler_step, sgd_step
