"""Student training, prediction, mode semantics, and checkpointing."""

import numpy as np
import pytest

from distillnn.datasets import (
    AugmentationSpec,
    SplitSpec,
    gen_classification,
    gen_regression,
)
from distillnn.errors import ContractError
from distillnn.rng import RngState
from distillnn.sampler import SamplerConfig
from distillnn.student import (
    DistParams,
    StudentConfig,
    load_student,
    save_student,
    student_classification_uncertainty,
    student_predict,
    total_loss,
    train_student,
)
from distillnn.teacher import TeacherConfig, mc_predict, train_teacher


@pytest.fixture(scope="module")
def reg_setup():
    data = gen_regression(400, SplitSpec("train", seed=0))
    cfg = TeacherConfig(task="regression", input_dim=1, output_dim=1,
                        hidden=(24, 24), dropout_rate=0.2, steps=800, lr=0.05,
                        aleatoric_head=True)
    teacher = train_teacher(cfg, data, RngState(1))
    return data, teacher


@pytest.fixture(scope="module")
def cls_setup():
    data = gen_classification(300, 3, SplitSpec("train", seed=0))
    cfg = TeacherConfig(task="classification", input_dim=2, output_dim=3,
                        hidden=(24, 24), dropout_rate=0.2, steps=800, lr=0.05)
    teacher = train_teacher(cfg, data, RngState(2))
    return data, teacher


def quick_student_cfg(task, **kwargs):
    base = dict(task=task, steps=400, lr=0.02, batch_size=32,
                augmentation=AugmentationSpec(enabled=False))
    base.update(kwargs)
    return StudentConfig(**base)


class TestConfig:
    def test_lambda_default(self):
        assert StudentConfig().lam == 1.0

    def test_negative_lambda_rejected(self):
        with pytest.raises(ContractError):
            StudentConfig(lam=-0.5)

    def test_mode_validation(self):
        with pytest.raises(ContractError):
            StudentConfig(mode="nope")


class TestTotalLoss:
    def test_zero_lambda(self):
        from distillnn.tensor import Tensor

        term = Tensor(0.5)
        assert total_loss(term, Tensor([[1.0]]), [[0.0]], "regression", 0.0) is term

    def test_linear_combination(self):
        from distillnn.tensor import Tensor

        term = Tensor(0.5)
        # mu=1, y=0.7 -> mae 0.3 ; total = 0.5 + 1 * 0.3
        got = total_loss(term, Tensor([[1.0]]), [[0.7]], "regression", 1.0)
        assert got.item() == pytest.approx(0.8, abs=1e-12)


class TestTraining:
    def test_loss_decreases(self, reg_setup):
        data, teacher = reg_setup
        cfg = quick_student_cfg("regression", steps=600)
        losses: list = []
        train_student(teacher, data, cfg, SamplerConfig(t_sigma=10), RngState(3),
                      loss_sink=losses)
        assert len(losses) == 600
        assert np.mean(losses[-50:]) < np.mean(losses[:50])

    def test_task_mismatch_rejected(self, reg_setup):
        data, teacher = reg_setup
        with pytest.raises(ContractError):
            train_student(teacher, data, quick_student_cfg("classification"),
                          SamplerConfig(), RngState(0))

    def test_init_from_teacher_copies_mu_head(self, reg_setup):
        data, teacher = reg_setup
        cfg = quick_student_cfg("regression", steps=1, init_from_teacher=True)
        student = train_student(teacher, data, cfg, SamplerConfig(t_sigma=5),
                                RngState(4))
        # after a single tiny step the student mu stays near the teacher's
        # deterministic prediction (exact equality holds only pre-step)
        from distillnn.nn import build_mlp, copy_compatible_parameters

        net = build_mlp(1, (24, 24), 2, RngState(99))
        copy_compatible_parameters(teacher.members[0], net)
        x = np.array([[0.5]])
        np.testing.assert_allclose(
            net.eval().forward_np(x)[:, :1],
            teacher.deterministic_forward(x)[:, :1],
            atol=1e-12,
        )

    def test_determinism(self, reg_setup):
        data, teacher = reg_setup
        cfg = quick_student_cfg("regression", steps=60)
        s1 = train_student(teacher, data, cfg, SamplerConfig(t_sigma=5), RngState(5))
        s2 = train_student(teacher, data, cfg, SamplerConfig(t_sigma=5), RngState(5))
        for p, q in zip(s1.net.parameters(), s2.net.parameters()):
            np.testing.assert_array_equal(p.data, q.data)


class TestPrediction:
    def test_single_pass_consumes_no_rng(self, reg_setup):
        data, teacher = reg_setup
        cfg = quick_student_cfg("regression", steps=50)
        student = train_student(teacher, data, cfg, SamplerConfig(t_sigma=5),
                                RngState(6))
        params = student_predict(student, np.array([[0.1]]))
        again = student_predict(student, np.array([[0.1]]))
        np.testing.assert_array_equal(params.mu, again.mu)
        np.testing.assert_array_equal(params.logvar, again.logvar)
        assert params.mu.shape == (1, 1) and params.logvar.shape == (1, 1)

    def test_predictive_variance_is_exp_s(self):
        params = DistParams(mu=np.array([[0.0]]), logvar=np.array([[1.5]]))
        assert params.predictive_variance()[0, 0] == pytest.approx(np.exp(1.5))

    def test_dd_mode_refuses_uncertainty(self, reg_setup):
        data, teacher = reg_setup
        cfg = quick_student_cfg("regression", steps=50, mode="mean_only_dd")
        student = train_student(teacher, data, cfg, SamplerConfig(t_sigma=5),
                                RngState(7))
        params = student_predict(student, np.array([[0.1]]))
        assert params.logvar is None
        with pytest.raises(ContractError):
            params.predictive_variance()


class TestClassificationUncertainty:
    def test_probabilities_and_degenerate_bald(self, cls_setup):
        data, teacher = cls_setup
        cfg = quick_student_cfg("classification", steps=120)
        student = train_student(teacher, data, cfg, SamplerConfig(), RngState(8))
        params = student_predict(student, data.features[:5])
        probs, mi = student_classification_uncertainty(params, 50, RngState(9))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(mi >= 0)

        # collapse the logit spread: mean ~ softmax(mu), bald ~ 0
        tight = DistParams(mu=params.mu, logvar=np.full_like(params.mu, -40.0))
        probs2, mi2 = student_classification_uncertainty(tight, 50, RngState(10))
        z = np.exp(params.mu - params.mu.max(axis=1, keepdims=True))
        np.testing.assert_allclose(probs2, z / z.sum(axis=1, keepdims=True),
                                   atol=1e-8)
        np.testing.assert_allclose(mi2, 0.0, atol=1e-12)

    def test_minimum_samples(self):
        params = DistParams(mu=np.zeros((1, 3)), logvar=np.zeros((1, 3)))
        with pytest.raises(ContractError):
            student_classification_uncertainty(params, 1, RngState(0))

    def test_dd_mode_refused(self):
        params = DistParams(mu=np.zeros((1, 3)), logvar=None)
        with pytest.raises(ContractError):
            student_classification_uncertainty(params, 50, RngState(0))


class TestDistillationFidelity:
    def test_student_mean_tracks_teacher(self, reg_setup):
        data, teacher = reg_setup
        cfg = quick_student_cfg("regression", steps=800, lr=0.02)
        student = train_student(teacher, data, cfg, SamplerConfig(t_sigma=20),
                                RngState(11))
        test = gen_regression(300, SplitSpec("test", seed=12))
        params = student_predict(student, test.features)
        teacher_mean = mc_predict(teacher, test.features, t=50,
                                  rng=RngState(13)).mu.mean(axis=0)
        rmse = np.sqrt(np.mean((params.mu - teacher_mean) ** 2))
        assert rmse < 0.1 * np.std(test.y)


class TestPersistence:
    def test_round_trip(self, reg_setup, tmp_path):
        data, teacher = reg_setup
        cfg = quick_student_cfg("regression", steps=40)
        student = train_student(teacher, data, cfg, SamplerConfig(t_sigma=5),
                                RngState(14))
        path = str(tmp_path / "student.ckpt")
        save_student(student, path, seed=14)
        loaded = load_student(path)
        assert loaded.config.mode == "full_distribution"
        assert loaded.output_dim == 1
        x = np.array([[0.4]])
        np.testing.assert_array_equal(
            student_predict(loaded, x).mu, student_predict(student, x).mu
        )

    def test_dd_flag_round_trips(self, reg_setup, tmp_path):
        data, teacher = reg_setup
        cfg = quick_student_cfg("regression", steps=40, mode="mean_only_dd")
        student = train_student(teacher, data, cfg, SamplerConfig(t_sigma=5),
                                RngState(15))
        path = str(tmp_path / "dd.ckpt")
        save_student(student, path)
        assert load_student(path).is_mean_only
