"""scikit-learn wrapper around the probe trainer.

WTSClassifier fits a linear probe on embedding features with the
overlap-gated teacher-mixing loss, exposing the usual fit / predict /
predict_proba / get_params surface so it drops into pipelines and
model-selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from . import losses
from .datasets import EmbeddingDataset
from .training import TrainConfig, train


class WTSClassifier(BaseEstimator, ClassifierMixin):
    """Linear probe with weak-teacher supervision over embedding features.

    Parameters mirror the training configuration. ``fit`` takes the class
    prototypes (one row per class, aligned with sorted unique labels) as
    a fit-time argument since they are data, not hyperparameters. With
    ``wts_enabled=False`` prototypes are optional and training reduces to
    plain cross entropy or prior-adjusted cross entropy.
    """

    def __init__(
        self,
        base_loss: str = "ce",
        wts_enabled: bool = True,
        tau: float = 0.5,
        epochs: int = 10,
        batch_size: int = 128,
        learning_rate: float = 0.01,
        momentum: float = 0.9,
        weight_decay: float = 5e-4,
        beta_alpha: float = 2.0,
        beta_beta: float = 2.0,
        seed: int = 0,
    ):
        self.base_loss = base_loss
        self.wts_enabled = wts_enabled
        self.tau = tau
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.beta_alpha = beta_alpha
        self.beta_beta = beta_beta
        self.seed = seed

    def fit(self, X, y, prototypes=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_encoded = np.unique(y, return_inverse=True)
        n_classes = len(self.classes_)
        if n_classes < 2:
            raise ValueError("need at least 2 classes")
        if prototypes is not None:
            prototypes = check_array(prototypes, dtype=np.float64)
            if prototypes.shape != (n_classes, X.shape[1]):
                raise ValueError(
                    f"prototypes must be ({n_classes}, {X.shape[1]}), "
                    f"got {prototypes.shape}"
                )
        elif self.wts_enabled:
            raise ValueError("wts_enabled=True requires class prototypes")
        else:
            # Placeholder directions so the dataset container validates;
            # with the switch disabled they never influence the loss.
            rng = np.random.default_rng(self.seed)
            prototypes = rng.standard_normal((n_classes, X.shape[1]))
        dataset = EmbeddingDataset(
            image_embeddings=X,
            observed_labels=y_encoded,
            text_embeddings=prototypes,
            class_names=[str(c) for c in self.classes_],
        )
        config = TrainConfig(
            seed=self.seed,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            tau=self.tau,
            beta_alpha=self.beta_alpha,
            beta_beta=self.beta_beta,
            base_loss=self.base_loss,
            wts_enabled=self.wts_enabled,
        )
        result = train(dataset, config)
        self.coef_ = result.probe.weights
        self.intercept_ = result.probe.bias
        self.log_temperature_ = result.teacher.log_temperature
        self.class_prior_ = result.prior.pi
        self.history_ = result.epochs
        self.switch_log_ = result.switch_log
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("WTSClassifier is not fitted; call fit first")

    def decision_function(self, X) -> np.ndarray:
        """Raw logits, one column per class (no prior adjustment)."""
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_.T + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        return losses.softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
