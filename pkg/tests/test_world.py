import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advicemaze.harness import packaged_map_path
from advicemaze.world import (
    Action,
    AgentPose,
    CellKind,
    EpisodeConfig,
    EpisodeTerminated,
    GridMap,
    Heading,
    MapParseError,
    MapValidationError,
    MazeEnv,
    load_map,
    load_map_file,
    rotate_map_90,
    serialize_map,
    shortest_path_length,
)

MINI_MAP = """\
width=4
height=4
milestone_entry_x=1
milestone_exit_x=2
####
#SN#
#..#
####
"""


def independent_bfs(gmap, start, goal):
    """Reference shortest-path oracle, deliberately separate from the package."""
    frontier = {start}
    seen = {start}
    dist = 0
    while frontier:
        if goal in frontier:
            return dist
        nxt = set()
        for x, y in frontier:
            for cx, cy in ((x, y - 1), (x + 1, y), (x, y + 1), (x - 1, y)):
                if (cx, cy) in seen:
                    continue
                if 0 <= cx < gmap.width and 0 <= cy < gmap.height:
                    if gmap.kind(cx, cy) in (CellKind.FLOOR, CellKind.GOAL):
                        nxt.add((cx, cy))
                        seen.add((cx, cy))
        frontier = nxt
        dist += 1
    return None


@pytest.fixture(scope="module")
def paper_map():
    return load_map_file(packaged_map_path("paper20.map"))


@pytest.fixture(scope="module")
def desk_map():
    return load_map_file(packaged_map_path("desk12.map"))


class TestLoadMap:
    def test_paper_map_dimensions(self, paper_map):
        assert paper_map.width == 20
        assert paper_map.height == 20

    def test_minimal_map(self):
        gmap = load_map(MINI_MAP)
        assert gmap.spawn == AgentPose(1, 1, Heading.EAST)
        assert gmap.goal == (2, 1)

    def test_walled_off_goal(self):
        text = MINI_MAP.replace("#SN#", "#S#N").replace("#..#", "#.##")
        with pytest.raises(MapValidationError, match="unreachable"):
            load_map(text)

    def test_unknown_character_reports_position(self):
        bad = MINI_MAP.replace("#..#", "#.x#")
        with pytest.raises(MapParseError) as err:
            load_map(bad)
        assert err.value.line == 7
        assert err.value.column == 3

    def test_short_row_reports_position(self):
        bad = MINI_MAP.replace("#..#", "#.#")
        with pytest.raises(MapParseError, match="3 cells"):
            load_map(bad)

    def test_missing_header(self):
        with pytest.raises(MapParseError, match="milestone_exit_x"):
            load_map(MINI_MAP.replace("milestone_exit_x=2\n", ""))

    def test_non_integer_header(self):
        with pytest.raises(MapParseError, match="integer"):
            load_map(MINI_MAP.replace("width=4", "width=four"))

    def test_duplicate_spawn_rejected(self):
        with pytest.raises(MapValidationError, match="spawn"):
            load_map(MINI_MAP.replace("#..#", "#S.#"))

    def test_missing_goal_rejected(self):
        with pytest.raises(MapValidationError, match="goal"):
            load_map(MINI_MAP.replace("#SN#", "#S.#"))

    def test_serialize_roundtrip(self, paper_map):
        again = load_map(serialize_map(paper_map))
        assert np.array_equal(again.cells, paper_map.cells)
        assert again.spawn == paper_map.spawn
        assert again.digest == paper_map.digest

    def test_cells_are_immutable(self, paper_map):
        with pytest.raises(ValueError):
            paper_map.cells[0, 0] = 0


class TestShortestPath:
    def test_same_cell_is_zero(self, desk_map):
        start = (desk_map.spawn.x, desk_map.spawn.y)
        assert shortest_path_length(desk_map, start, start) == 0

    def test_adjacent_cells(self, desk_map):
        x, y = desk_map.spawn.x, desk_map.spawn.y
        assert shortest_path_length(desk_map, (x, y), (x + 1, y)) == 1

    def test_paper_map_against_independent_bfs(self, paper_map):
        start = (paper_map.spawn.x, paper_map.spawn.y)
        expected = independent_bfs(paper_map, start, paper_map.goal)
        assert expected is not None
        assert shortest_path_length(paper_map, start, paper_map.goal) == expected

    def test_unreachable_returns_none(self):
        # the loader refuses split maps, so build the split grid directly
        gmap = load_map(MINI_MAP)
        cells = gmap.cells.copy()
        cells[2, 1] = int(CellKind.WALL)
        cells[2, 2] = int(CellKind.FLOOR)
        cells[1, 2] = int(CellKind.WALL)  # goal cell replaced by wall, floor island at (2,2)
        split = GridMap(
            width=4, height=4, cells=cells,
            spawn=gmap.spawn, goal=gmap.goal,
            milestone_entry=gmap.milestone_entry, milestone_exit=gmap.milestone_exit,
        )
        assert shortest_path_length(split, (1, 1), (2, 2)) is None

    def test_non_traversable_argument_rejected(self, desk_map):
        with pytest.raises(ValueError):
            shortest_path_length(desk_map, (0, 0), desk_map.goal)


class TestRotation:
    def test_corner_maps_to_top_right(self, paper_map):
        rotated = rotate_map_90(paper_map)
        # cell (0,0) lands at x = height-1, y = 0
        assert rotated.kind(paper_map.height - 1, 0) == paper_map.kind(0, 0)

    def test_four_rotations_identity(self, paper_map):
        gmap = paper_map
        for _ in range(4):
            gmap = rotate_map_90(gmap)
        assert np.array_equal(gmap.cells, paper_map.cells)
        assert gmap.spawn == paper_map.spawn
        assert gmap.goal == paper_map.goal
        assert gmap.milestone_entry == paper_map.milestone_entry
        assert gmap.milestone_exit == paper_map.milestone_exit

    def test_bfs_distance_invariant(self, paper_map):
        rotated = rotate_map_90(paper_map)
        original = shortest_path_length(
            paper_map, (paper_map.spawn.x, paper_map.spawn.y), paper_map.goal
        )
        assert shortest_path_length(
            rotated, (rotated.spawn.x, rotated.spawn.y), rotated.goal
        ) == original

    def test_traversable_count_invariant(self, paper_map):
        rotated = rotate_map_90(paper_map)
        assert len(rotated.traversable_cells()) == len(paper_map.traversable_cells())

    def test_spawn_heading_rotates(self, paper_map):
        assert rotate_map_90(paper_map).spawn.heading == Heading.SOUTH


class TestEnv:
    def test_reset_returns_spawn(self, desk_map):
        env = MazeEnv(desk_map)
        pose1 = env.reset()
        env.step(Action.FORWARD)
        pose2 = env.reset()
        assert pose1 == pose2 == desk_map.spawn
        assert env.score == 0.0
        assert env.steps == 0

    def test_forward_into_wall_is_noop_with_cost(self, desk_map):
        env = MazeEnv(desk_map)
        env.reset()
        env.step(Action.FORWARD)  # east to (3, 7); the hedge band starts at x=4
        before = env.pose
        assert not desk_map.is_traversable(before.x + 1, before.y)
        out = env.step(Action.FORWARD)
        assert out.new_pose == before
        assert out.reward == -0.5

    def test_turn_around_twice_restores_heading(self, desk_map):
        env = MazeEnv(desk_map)
        start = env.reset()
        env.step(Action.TURN_AROUND)
        out = env.step(Action.TURN_AROUND)
        assert out.new_pose.heading == start.heading
        assert env.score == -1.0

    def _walk_into_corridor(self, env):
        """Spawn (2,7) east -> corridor row 6 -> first cell past the entry line."""
        env.step(Action.TURN_LEFT)  # north
        env.step(Action.FORWARD)  # (2, 6)
        env.step(Action.TURN_RIGHT)  # east
        env.step(Action.FORWARD)  # (3, 6)
        return env.step(Action.FORWARD)  # (4, 6): crosses milestone_entry_x=4

    def test_first_entry_crossing_pays_bonus(self, desk_map):
        env = MazeEnv(desk_map)
        env.reset()
        out = self._walk_into_corridor(env)
        assert out.milestone_fired == "entry"
        assert out.reward == 1499.5

    def test_milestone_fires_once(self, desk_map):
        env = MazeEnv(desk_map)
        env.reset()
        self._walk_into_corridor(env)
        env.step(Action.TURN_AROUND)
        env.step(Action.FORWARD)  # back west of the entry line
        env.step(Action.TURN_AROUND)
        out = env.step(Action.FORWARD)  # re-enter
        assert out.milestone_fired is None
        assert out.reward == -0.5

    def test_goal_run_score(self, desk_map):
        env = MazeEnv(desk_map)
        env.reset()
        self._walk_into_corridor(env)  # now at (4, 6) facing east
        for _ in range(4):
            env.step(Action.FORWARD)  # through the corridor to (8, 6)
        env.step(Action.TURN_RIGHT)  # south
        for _ in range(2):
            env.step(Action.FORWARD)  # down to (8, 8)
        env.step(Action.TURN_LEFT)  # east
        out = env.step(Action.FORWARD)  # onto the goal at (9, 8)
        assert out.milestone_fired == "goal"
        assert out.terminal
        assert env.reached_goal
        assert env.steps == 14
        # two milestones + goal minus fourteen step costs
        assert env.score == pytest.approx(15000 + 1500 + 1500 - 0.5 * 14, abs=1e-9)

    def test_step_after_terminal_raises(self, desk_map):
        env = MazeEnv(desk_map, EpisodeConfig(max_actions=1))
        env.reset()
        out = env.step(Action.TURN_LEFT)
        assert out.terminal
        with pytest.raises(EpisodeTerminated):
            env.step(Action.FORWARD)

    def test_budget_exhaustion_terminates(self, desk_map):
        env = MazeEnv(desk_map, EpisodeConfig(max_actions=3))
        env.reset()
        env.step(Action.TURN_LEFT)
        env.step(Action.TURN_RIGHT)
        out = env.step(Action.TURN_LEFT)
        assert out.terminal
        assert not env.reached_goal

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.sampled_from(list(Action)), min_size=1, max_size=120))
    def test_score_accounting_identity(self, actions):
        gmap = load_map_file(packaged_map_path("desk12.map"))
        env = MazeEnv(gmap, EpisodeConfig(max_actions=200))
        env.reset()
        for action in actions:
            if env.terminal:
                break
            out = env.step(action)
            assert gmap.is_traversable(out.new_pose.x, out.new_pose.y)
        fired = env.milestones_fired
        expected = (
            15000.0 * env.reached_goal
            + 1500.0 * ("entry" in fired)
            + 1500.0 * ("exit" in fired)
            - 0.5 * env.steps
        )
        assert env.score == pytest.approx(expected, abs=1e-9)

    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.sampled_from(list(Action)), min_size=1, max_size=60), st.integers(0, 2**31))
    def test_determinism(self, actions, seed):
        gmap = load_map_file(packaged_map_path("desk12.map"))

        def trace():
            env = MazeEnv(gmap, EpisodeConfig(max_actions=100, seed=seed))
            env.reset()
            out = []
            for action in actions:
                if env.terminal:
                    break
                res = env.step(action)
                out.append((res.reward, res.new_pose, res.terminal, res.milestone_fired))
            return out

        assert trace() == trace()
