import numpy as np
import pytest

import splineseg as ss
from splineseg.session import SessionError, create_session
from splineseg.surface import to_obj


@pytest.fixture(scope="module")
def ball_session(ball_phantom, default_mesh):
    image, prob, _ = ball_phantom
    return create_session(prob, default_mesh, ss.EnergyConfig(), image=image)


def fresh_copy(sess, ball_phantom, default_mesh):
    image, prob, _ = ball_phantom
    return create_session(prob, default_mesh, ss.EnergyConfig(), image=image)


class TestCreate:
    def test_initial_fit_quality(self, ball_session, ball_phantom):
        _, _, truth = ball_phantom
        mask = ss.rasterize(ball_session.surface, truth.dims, truth.spacing)
        assert ss.dice(mask, truth) >= 0.95

    def test_deterministic(self, ball_phantom, default_mesh):
        _, prob, _ = ball_phantom
        a = create_session(prob, default_mesh, ss.EnergyConfig())
        b = create_session(prob, default_mesh, ss.EnergyConfig())
        assert np.array_equal(a.surface.coeffs, b.surface.coeffs)

    def test_empty_foreground_rejected(self, default_mesh):
        prob = ss.VoxelVolume((16, 16, 16), (1, 1, 1),
                              np.zeros(16 ** 3, np.float32), "probability")
        with pytest.raises(SessionError, match="empty foreground"):
            create_session(prob, default_mesh, ss.EnergyConfig())

    def test_grid_mismatch_rejected(self, ball_phantom, default_mesh):
        image, prob, _ = ball_phantom
        other = ss.VoxelVolume((16, 16, 16), (1, 1, 1),
                               np.zeros(16 ** 3, np.float32), "image")
        with pytest.raises(SessionError, match="grids differ"):
            create_session(prob, default_mesh, ss.EnergyConfig(), image=other)


class TestAddPoint:
    def test_point_on_surface_is_noop(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        theta, phi = 1.0, 1.2
        rho = ss.evaluate(sess.surface, theta, phi)
        before = sess.surface.coeffs.copy()
        sess.add_point(ss.embed(sess.origin, rho, theta, phi))
        assert np.abs(sess.surface.coeffs - before).max() < sess.cfg.tol

    def test_point_outside_is_reached(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        theta, phi = 0.8, 1.9
        rho = 1.15 * ss.evaluate(sess.surface, theta, phi)
        pt, _ = sess.add_point(ss.embed(sess.origin, rho, theta, phi))
        assert sess.residual(pt) <= max(0.05 * rho, 2 * sess.cfg.tol)

    def test_antipodal_pair_both_satisfied(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        theta, phi = 0.6, 1.0
        anti_theta = np.mod(theta + np.pi, 2 * np.pi)
        anti_phi = np.pi - phi
        r1 = 1.10 * ss.evaluate(sess.surface, theta, phi)
        sess.add_point(ss.embed(sess.origin, r1, theta, phi))
        r2 = 0.90 * ss.evaluate(sess.surface, anti_theta, anti_phi)
        sess.add_point(ss.embed(sess.origin, r2, anti_theta, anti_phi))
        bounds = {p.id: max(0.05 * p.rho_u, 2 * sess.cfg.tol) for p in sess.points}
        for pid, resid in sess.residuals().items():
            assert resid <= bounds[pid]

    def test_point_at_origin_rejected(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        with pytest.raises(SessionError):
            sess.add_point(sess.origin)


class TestRemoveUndo:
    def test_add_remove_near_reversible(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        base_mask = sess.export().mask
        rho = 1.12 * ss.evaluate(sess.surface, 0.4, 1.3)
        pt, _ = sess.add_point(ss.embed(sess.origin, rho, 0.4, 1.3))
        sess.remove_point(pt.id)
        assert ss.dice(sess.export().mask, base_mask) >= 0.99

    def test_remove_unknown_id(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        with pytest.raises(SessionError, match="unknown point"):
            sess.remove_point("nope")

    def test_remove_one_of_two_keeps_other(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        r1 = 1.10 * ss.evaluate(sess.surface, 0.3, 1.1)
        p1, _ = sess.add_point(ss.embed(sess.origin, r1, 0.3, 1.1))
        r2 = 0.92 * ss.evaluate(sess.surface, 3.3, 1.8)
        p2, _ = sess.add_point(ss.embed(sess.origin, r2, 3.3, 1.8))
        sess.remove_point(p1.id)
        assert [p.id for p in sess.points] == [p2.id]
        assert sess.residual(p2) <= max(0.05 * p2.rho_u, 2 * sess.cfg.tol)

    def test_undo_restores_bit_identical(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        before = sess.surface.coeffs.copy()
        rho = 1.1 * ss.evaluate(sess.surface, 1.0, 1.0)
        sess.add_point(ss.embed(sess.origin, rho, 1.0, 1.0))
        sess.undo()
        assert np.array_equal(sess.surface.coeffs, before)
        assert sess.points == []

    def test_undo_fresh_session_raises(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        with pytest.raises(SessionError, match="undo"):
            sess.undo()

    def test_two_adds_two_undos(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        before = sess.surface.coeffs.copy()
        sess.add_point(ss.embed(sess.origin, 11.0, 0.5, 1.0))
        sess.add_point(ss.embed(sess.origin, 9.0, 2.5, 2.0))
        sess.undo()
        sess.undo()
        assert np.array_equal(sess.surface.coeffs, before)


class TestExport:
    def test_mask_quality_and_topology(self, ball_session, ball_phantom):
        _, _, truth = ball_phantom
        bundle = ball_session.export()
        assert ss.dice(bundle.mask, truth) >= 0.95
        stats = ss.component_stats(bundle.mask)
        assert stats["components"] == 1
        assert stats["cavities"] == 0

    def test_export_deterministic_bytes(self, ball_session):
        a = ball_session.export()
        b = ball_session.export()
        assert np.array_equal(a.mask.data, b.mask.data)
        assert to_obj(a.mesh) == to_obj(b.mesh)
        import json
        assert json.dumps(a.surface, sort_keys=True) == json.dumps(b.surface, sort_keys=True)

    def test_topology_after_edits(self, ball_phantom, default_mesh):
        sess = fresh_copy(None, ball_phantom, default_mesh)
        sess.add_point(ss.embed(sess.origin, 1.18 * 10, 0.2, 0.9))
        sess.add_point(ss.embed(sess.origin, 0.85 * 10, 4.0, 2.2))
        stats = ss.component_stats(sess.export().mask)
        assert stats["components"] == 1
        assert stats["cavities"] == 0


class TestReplay:
    def test_point_sequence_reproduces_surface(self, ball_phantom, default_mesh):
        image, prob, _ = ball_phantom
        sess = create_session(prob, default_mesh, ss.EnergyConfig(), image=image)
        clicks = [
            ss.embed(sess.origin, 11.5, 0.9, 1.2),
            ss.embed(sess.origin, 9.0, 2.0, 2.4),
            ss.embed(sess.origin, 10.8, 4.4, 0.7),
        ]
        for c in clicks:
            sess.add_point(c)
        replayed = create_session(prob, default_mesh, ss.EnergyConfig(), image=image)
        replayed.apply_ops([{"op": "add", "xyz": list(map(float, c))} for c in clicks])
        assert np.array_equal(replayed.surface.coeffs, sess.surface.coeffs)

    def test_state_dict_serializable_and_replayable(self, ball_phantom, default_mesh):
        import json

        image, prob, _ = ball_phantom
        sess = create_session(prob, default_mesh, ss.EnergyConfig(), image=image)
        sess.add_point(ss.embed(sess.origin, 11.2, 0.6, 1.0))
        state = sess.state_dict(prob_ref="vol/prob", image_ref="vol/img")
        blob = json.dumps(state, sort_keys=True)
        back = json.loads(blob)
        assert back["prob"] == "vol/prob"
        assert back["points"][0]["id"] == "p0"
        replayed = create_session(prob, default_mesh, ss.EnergyConfig(), image=image)
        replayed.apply_ops(back["ops"])
        assert np.array_equal(replayed.surface.coeffs, sess.surface.coeffs)

    def test_oplog_replay_with_undo(self, ball_phantom, default_mesh):
        image, prob, _ = ball_phantom
        sess = create_session(prob, default_mesh, ss.EnergyConfig(), image=image)
        sess.add_point(ss.embed(sess.origin, 11.5, 0.9, 1.2))
        pt, _ = sess.add_point(ss.embed(sess.origin, 9.1, 2.2, 1.9))
        sess.undo()
        sess.add_point(ss.embed(sess.origin, 10.6, 5.0, 2.6))
        replayed = create_session(prob, default_mesh, ss.EnergyConfig(), image=image)
        replayed.apply_ops(list(sess.oplog))
        assert np.array_equal(replayed.surface.coeffs, sess.surface.coeffs)
        assert [p.id for p in replayed.points] == [p.id for p in sess.points]
