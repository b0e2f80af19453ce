"""scikit-learn style wrapper around the router and its training loop."""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from toih.moe.model import forward
from toih.moe.params import ModelConfig, MoEParams
from toih.training.data import TrainingExample
from toih.training.evaluation import evaluate_router
from toih.training.loop import TrainConfig, train
from toih.training.losses import LossWeights
from toih.validation import OPTION_LABELS, check_finite_matrix


def _as_inputs(X, config):
    """Normalise ``X`` to a list of (F_vis, F_ocr, query) triples."""
    out = []
    for i, x in enumerate(X):
        if isinstance(x, TrainingExample):
            x = (x.f_vis, x.f_ocr, x.query)
        try:
            f_vis, f_ocr, query = x
        except (TypeError, ValueError):
            raise ValueError(f"X[{i}] must be a TrainingExample or an (F_vis, F_ocr, query) triple") from None
        shape = (config.n_patches, config.d)
        out.append(
            (
                check_finite_matrix(f_vis, f"X[{i}].F_vis", shape),
                check_finite_matrix(f_ocr, f"X[{i}].F_ocr", shape),
                check_finite_matrix(query, f"X[{i}].query"),
            )
        )
    return out


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class ConflictAwareMoEClassifier(ClassifierMixin, BaseEstimator):
    """Multiple-choice answerer with consistency-weighted expert routing.

    ``fit`` takes a sequence of :class:`TrainingExample`; ``y`` is ignored
    because answers, conflict targets and allocation targets travel with the
    examples. Predictions are option indices 0..3 (A..D).
    """

    def __init__(
        self,
        d=32,
        n_patches=32,
        k_select=8,
        depth=6,
        insert_layer=None,
        expert_hidden=64,
        n_query_tokens=4,
        lambda_cls=1.1,
        lambda_sft=1.0,
        lambda_aux=0.01,
        lr=1e-5,
        epochs=2,
        warmup_steps=80,
        weight_decay=0.01,
        batch_size=5,
        max_steps=None,
        random_state=42,
    ):
        self.d = d
        self.n_patches = n_patches
        self.k_select = k_select
        self.depth = depth
        self.insert_layer = insert_layer
        self.expert_hidden = expert_hidden
        self.n_query_tokens = n_query_tokens
        self.lambda_cls = lambda_cls
        self.lambda_sft = lambda_sft
        self.lambda_aux = lambda_aux
        self.lr = lr
        self.epochs = epochs
        self.warmup_steps = warmup_steps
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.random_state = random_state

    def _model_config(self):
        return ModelConfig(
            d=self.d,
            n_patches=self.n_patches,
            k_select=self.k_select,
            depth=self.depth,
            insert_layer=self.insert_layer,
            expert_hidden=self.expert_hidden,
            n_query_tokens=self.n_query_tokens,
            seed=self.random_state,
        )

    def fit(self, X, y=None):
        examples = list(X)
        if not examples:
            raise ValueError("cannot fit on an empty dataset")
        if not all(isinstance(x, TrainingExample) for x in examples):
            raise TypeError("fit expects TrainingExample objects")
        config = self._model_config()
        _as_inputs(examples, config)
        tc = TrainConfig(
            lr=self.lr,
            epochs=self.epochs,
            warmup_steps=self.warmup_steps,
            weight_decay=self.weight_decay,
            seed=self.random_state,
            batch_size=self.batch_size,
            max_steps=self.max_steps,
        )
        weights = LossWeights(self.lambda_cls, self.lambda_sft, self.lambda_aux)
        self.params_, self.history_ = train(tc, config, examples, weights)
        self.config_ = config
        self.classes_ = np.arange(len(OPTION_LABELS))
        return self

    @classmethod
    def from_params(cls, params):
        """A fitted estimator wrapping existing parameters (e.g. a loaded checkpoint)."""
        if not isinstance(params, MoEParams):
            raise TypeError("expected MoEParams")
        c = params.config
        est = cls(
            d=c.d, n_patches=c.n_patches, k_select=c.k_select, depth=c.depth,
            insert_layer=c.insert_layer, expert_hidden=c.expert_hidden,
            n_query_tokens=c.n_query_tokens, random_state=c.seed,
        )
        est.params_, est.history_, est.config_ = params, [], c
        est.classes_ = np.arange(len(OPTION_LABELS))
        return est

    def _forward_all(self, X):
        check_is_fitted(self, "params_")
        return [forward(self.config_, self.params_, *x) for x in _as_inputs(X, self.config_)]

    def decision_function(self, X):
        return np.array([r.option_logits.value for r in self._forward_all(X)]).reshape(-1, 4)

    def predict_proba(self, X):
        return _softmax_rows(self.decision_function(X))

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def predict_conflict(self, X):
        """Distribution over (temporal, action, object, spatial) from the pooled classifier."""
        logits = np.array([r.pooled_video_logits.value for r in self._forward_all(X)]).reshape(-1, 4)
        return _softmax_rows(logits)

    def routing_traces(self, X):
        return [r.trace for r in self._forward_all(X)]

    def evaluate(self, examples):
        check_is_fitted(self, "params_")
        return evaluate_router(self.config_, self.params_, examples)
