import numpy as np
import pytest

from advicemaze.harness import packaged_map_path
from advicemaze.render import (
    Frame,
    FrameStack,
    RenderConfig,
    TexturePalette,
    aliasing_index,
    all_state_frames,
    push_and_stack,
    render,
    slice_height,
    write_pgm,
)
from advicemaze.world import AgentPose, CellKind, GridMap, Heading, load_map, load_map_file

ALIASED = TexturePalette.aliased()
LANDMARKED = TexturePalette.landmarked()
SMALL = RenderConfig(width=16, height=16)


@pytest.fixture(scope="module")
def paper_map():
    return load_map_file(packaged_map_path("paper20.map"))


@pytest.fixture(scope="module")
def desk_map():
    return load_map_file(packaged_map_path("desk12.map"))


def _frame(intensity_grid):
    arr = np.asarray(intensity_grid, dtype=np.float64)
    return Frame(width=arr.shape[1], height=arr.shape[0], intensities=arr)


class TestRender:
    def test_deterministic(self, paper_map):
        a = render(paper_map, paper_map.spawn, ALIASED)
        b = render(paper_map, paper_map.spawn, ALIASED)
        assert np.array_equal(a.intensities, b.intensities)

    def test_intensities_in_range(self, paper_map):
        for heading in Heading:
            frame = render(paper_map, AgentPose(9, 9, heading), ALIASED)
            assert frame.intensities.min() >= 0.0
            assert frame.intensities.max() <= 1.0

    def test_facing_adjacent_wall_fills_frame(self, paper_map):
        # (8, 9) faces the hedge row at y=8 one cell north: wall fills the view
        frame = render(paper_map, AgentPose(8, 9, Heading.NORTH), ALIASED)
        shades = [ALIASED.shade(CellKind.HEDGE, u / 50, 0.5) for u in range(50)]
        lo, hi = min(shades) - 1e-9, max(shades) + 1e-9
        in_band = (frame.intensities >= lo) & (frame.intensities <= hi)
        assert in_band.mean() >= 0.9

    def test_corridor_poses_alias(self, paper_map):
        # two distinct mid-corridor poses staring at the hedge: same local geometry
        a = render(paper_map, AgentPose(9, 9, Heading.NORTH), ALIASED)
        b = render(paper_map, AgentPose(10, 9, Heading.NORTH), ALIASED)
        assert np.abs(a.intensities - b.intensities).max() <= 0.02

    def test_landmark_changes_view(self, paper_map):
        pose = AgentPose(16, 4, Heading.EAST)  # staring at the blue building
        aliased = render(paper_map, pose, ALIASED)
        landmarked = render(paper_map, pose, LANDMARKED)
        assert np.abs(aliased.intensities - landmarked.intensities).max() > 0.05

    def test_slice_height_non_increasing(self):
        heights = [slice_height(d, 32) for d in np.linspace(0.3, 25.0, 400)]
        assert all(a >= b for a, b in zip(heights, heights[1:]))


class TestFrameStack:
    def test_first_push_pads_with_itself(self):
        stack = FrameStack(4)
        f = _frame(np.full((4, 4), 0.5))
        obs = push_and_stack(stack, f)
        assert obs.shape == (4, 4, 4)
        assert np.array_equal(obs[0], obs[3])

    def test_eviction_after_capacity(self):
        stack = FrameStack(2)
        frames = [_frame(np.full((2, 2), v)) for v in (0.1, 0.2, 0.3)]
        for f in frames:
            obs = push_and_stack(stack, f)
        assert obs[0, 0, 0] == pytest.approx(0.3)
        assert obs[1, 0, 0] == pytest.approx(0.2)  # 0.1 evicted

    def test_newest_first_order(self):
        stack = FrameStack(2)
        push_and_stack(stack, _frame([[0.1]]))
        obs = push_and_stack(stack, _frame([[0.9]]))
        assert obs[0, 0, 0] == pytest.approx(0.9)
        assert obs[1, 0, 0] == pytest.approx(0.1)

    def test_partial_stack_pads_with_oldest(self):
        stack = FrameStack(3)
        push_and_stack(stack, _frame([[0.1]]))
        obs = push_and_stack(stack, _frame([[0.6]]))
        assert [obs[i, 0, 0] for i in range(3)] == pytest.approx([0.6, 0.1, 0.1])

    def test_dimension_mismatch_rejected(self):
        stack = FrameStack(2)
        stack.push(_frame(np.zeros((4, 4))))
        with pytest.raises(ValueError, match="stack holds"):
            stack.push(_frame(np.zeros((2, 2))))

    def test_empty_stack_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            FrameStack(2).observation()


def brute_force_index(gmap, palette, cfg, threshold=0.02):
    """Exhaustive pairwise oracle, kept independent of the library loop."""
    poses = [
        AgentPose(x, y, h)
        for (x, y) in gmap.traversable_cells()
        for h in (Heading.NORTH, Heading.EAST, Heading.SOUTH, Heading.WEST)
    ]
    frames = [render(gmap, p, palette, cfg).intensities for p in poses]
    close = total = 0
    for i in range(len(frames)):
        for j in range(len(frames)):
            if i == j:
                continue
            total += 1
            if np.abs(frames[i] - frames[j]).mean() < threshold:
                close += 1
    return close / total


class TestAliasingIndex:
    def test_matches_brute_force(self):
        gmap = load_map(
            "width=5\nheight=4\nmilestone_entry_x=1\nmilestone_exit_x=2\n"
            "#####\n#SN.#\n#...#\n#####\n"
        )
        got = aliasing_index(gmap, ALIASED, SMALL)
        want = brute_force_index(gmap, ALIASED, SMALL)
        assert got == pytest.approx(want, abs=1e-12)

    def test_identical_views_give_index_one(self):
        # a single boxed-in cell seen through a direction-blind texture:
        # all four heading states render identically, so every pair aliases
        class FlatPalette(TexturePalette):
            def shade(self, kind, u, dist):
                return 0.5

        base = load_map(
            "width=4\nheight=4\nmilestone_entry_x=1\nmilestone_exit_x=2\n"
            "####\n#SN#\n#..#\n####\n"
        )
        cells = base.cells.copy()
        cells[1, 2] = int(CellKind.GOAL)
        cells[1, 1] = int(CellKind.WALL)
        cells[2, 1] = int(CellKind.WALL)
        cells[2, 2] = int(CellKind.WALL)
        # only (2,1) the goal cell remains; walls surround it symmetrically
        boxed = GridMap(
            width=4, height=4, cells=cells,
            spawn=AgentPose(2, 1, Heading.NORTH), goal=(2, 1),
            milestone_entry=base.milestone_entry, milestone_exit=base.milestone_exit,
        )
        assert len(boxed.traversable_cells()) == 1
        assert aliasing_index(boxed, FlatPalette(mode="aliased"), SMALL) == 1.0

    def test_landmarks_reduce_aliasing_on_desk_map(self, desk_map):
        aliased = aliasing_index(desk_map, ALIASED, SMALL)
        landmarked = aliasing_index(desk_map, LANDMARKED, SMALL)
        assert landmarked < aliased


class TestPgm:
    def test_p5_header_and_payload(self, tmp_path, paper_map):
        frame = render(paper_map, paper_map.spawn, ALIASED, RenderConfig(8, 8))
        path = tmp_path / "frame.pgm"
        write_pgm(frame, path)
        blob = path.read_bytes()
        assert blob.startswith(b"P5\n8 8\n255\n")
        assert len(blob) == len(b"P5\n8 8\n255\n") + 64


def test_all_state_frames_shape(desk_map):
    frames = all_state_frames(desk_map, ALIASED, SMALL)
    assert frames.shape == (len(desk_map.traversable_cells()) * 4, 16 * 16)
