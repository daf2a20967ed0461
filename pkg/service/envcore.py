from collections import deque
from functools import cached_property

import numpy as np

from constants import (AGENT_INTENSITY, BACKGROUND_INTENSITY, CAR_INTENSITY, ERROR_INVALID_STATE, ERROR_NOT_A_RENDER,
                       ERROR_STATE_SPACE_TOO_LARGE, LANE_INTENSITY, LOG_STATE_SPACE_ENUMERATED,
                       LOG_VALUE_ITERATION_DONE, MAX_ENUMERATED_STATES)
from exceptions_handler import CapacityError, NotAValidRender, StateError
from models.data.env import Action, EnvState, Frame, NUM_ACTIONS
from models.data.stats import QTable
from models.request.env import EnvConfig
from utils.logger import logger, log_performance


class MiniFreeway:
    """Deterministic pixel MDP: cross `num_lanes` wrapping car lanes from the bottom row to row 0.

    Every step the cars advance by their lane speed (mod grid_size), then the agent moves.
    Landing on a car costs -1, reaching row 0 pays +1; both send the agent back to the
    bottom row immediately. Car columns are a function of tick modulo `car_period`, so the
    enumerated state space stores that phase in `tick`.
    """

    def __init__(self, config: EnvConfig):
        config.check()
        self.config = config

    # -- dynamics -------------------------------------------------------------------------

    def reset(self) -> EnvState:
        cfg = self.config
        return EnvState(agent_row=cfg.grid_size - 1, car_cols=cfg.start_cols, tick=0)

    def validate(self, state: EnvState) -> None:
        cfg = self.config
        if not 0 <= state.agent_row < cfg.grid_size or state.tick < 0:
            raise StateError(detail=f"{ERROR_INVALID_STATE}: {state}")
        if len(state.car_cols) != cfg.num_lanes or any(not 0 <= c < cfg.grid_size for c in state.car_cols):
            raise StateError(detail=f"{ERROR_INVALID_STATE}: {state}")

    def step(self, state: EnvState, action: Action) -> tuple[EnvState, float, bool]:
        self.validate(state)
        cfg = self.config
        action = Action(action)
        cars = tuple((c + v) % cfg.grid_size for c, v in zip(state.car_cols, cfg.lane_speeds))

        row = state.agent_row
        if action == Action.UP:
            row = max(0, row - 1)
        elif action == Action.DOWN:
            row = min(cfg.grid_size - 1, row + 1)

        reward = 0.0
        if row in cfg.lane_rows and cars[cfg.lane_rows.index(row)] == cfg.agent_col:
            reward, row = -1.0, cfg.grid_size - 1
        elif row == 0:
            reward, row = 1.0, cfg.grid_size - 1

        tick = state.tick + 1
        return EnvState(agent_row=row, car_cols=cars, tick=tick), reward, tick >= cfg.episode_horizon

    # -- rendering ------------------------------------------------------------------------

    def render(self, state: EnvState) -> Frame:
        cfg = self.config
        off = cfg.grid_offset
        frame = np.full((cfg.frame_size, cfg.frame_size), BACKGROUND_INTENSITY, dtype=np.float32)
        for lane_row, col in zip(cfg.lane_rows, state.car_cols):
            frame[off + lane_row, off:off + cfg.grid_size] = LANE_INTENSITY
            frame[off + lane_row, off + col] = CAR_INTENSITY
        frame[off + state.agent_row, off + cfg.agent_col] = AGENT_INTENSITY
        return frame

    @cached_property
    def _phase_of_cars(self) -> dict[tuple[int, ...], int]:
        cfg = self.config
        phases = {}
        for phase in range(cfg.car_period):
            cars = tuple((c + phase * v) % cfg.grid_size for c, v in zip(cfg.start_cols, cfg.lane_speeds))
            phases[cars] = phase
        return phases

    def canonical(self, state: EnvState) -> EnvState:
        """Same state with tick folded to the car phase."""
        return state.with_tick(state.tick % self.config.car_period)

    def unrender(self, frame: Frame) -> EnvState:
        cfg = self.config
        frame = np.asarray(frame)
        if frame.shape != (cfg.frame_size, cfg.frame_size):
            raise NotAValidRender(detail=f"{ERROR_NOT_A_RENDER}: shape {frame.shape}")
        off = cfg.grid_offset
        grid = frame[off:off + cfg.grid_size, off:off + cfg.grid_size]

        agent = np.argwhere(grid == AGENT_INTENSITY)
        if len(agent) != 1 or agent[0][1] != cfg.agent_col:
            raise NotAValidRender(detail=f"{ERROR_NOT_A_RENDER}: expected one agent pixel")
        cars = []
        for lane_row in cfg.lane_rows:
            cols = np.flatnonzero(grid[lane_row] == CAR_INTENSITY)
            if len(cols) != 1:
                raise NotAValidRender(detail=f"{ERROR_NOT_A_RENDER}: lane {lane_row} has {len(cols)} cars")
            cars.append(int(cols[0]))
        phase = self._phase_of_cars.get(tuple(cars))
        if phase is None:
            raise NotAValidRender(detail=f"{ERROR_NOT_A_RENDER}: car layout is off-phase")

        state = EnvState(agent_row=int(agent[0][0]), car_cols=tuple(cars), tick=phase)
        if not np.array_equal(self.render(state), frame):
            raise NotAValidRender(detail=f"{ERROR_NOT_A_RENDER}: frame differs from the render of {state}")
        return state

    # -- oracles --------------------------------------------------------------------------

    @log_performance(threshold_ms=2000)
    def enumerate_valid_states(self) -> list[EnvState]:
        """Breadth-first closure of the canonical states reachable from the start state."""
        cfg = self.config
        if cfg.grid_size * cfg.car_period > MAX_ENUMERATED_STATES:
            raise CapacityError(detail=f"{ERROR_STATE_SPACE_TOO_LARGE}: up to "
                                       f"{cfg.grid_size * cfg.car_period} states")
        start = self.canonical(self.reset())
        seen = {start}
        order = [start]
        queue = deque([start])
        while queue:
            state = queue.popleft()
            for action in Action:
                nxt = self.canonical(self.step(state, action)[0])
                if nxt not in seen:
                    if len(seen) >= MAX_ENUMERATED_STATES:
                        raise CapacityError(detail=ERROR_STATE_SPACE_TOO_LARGE)
                    seen.add(nxt)
                    order.append(nxt)
                    queue.append(nxt)
        logger.info(LOG_STATE_SPACE_ENUMERATED, extra={"count": len(order), "period": cfg.car_period})
        return order

    @cached_property
    def valid_states(self) -> list[EnvState]:
        return self.enumerate_valid_states()

    @cached_property
    def valid_index(self) -> dict[EnvState, int]:
        return {s: i for i, s in enumerate(self.valid_states)}

    def reachable_next(self, state: EnvState) -> set[EnvState]:
        state = self.canonical(state)
        if state not in self.valid_index:
            raise StateError(detail=f"{ERROR_INVALID_STATE}: {state} is not reachable from the start state")
        return {self.canonical(self.step(state, a)[0]) for a in Action}

    @log_performance(threshold_ms=2000)
    def value_iteration(self, tol: float = 1e-8, max_iters: int = 100_000) -> tuple[QTable, float]:
        """Exact Q* over S* x A (infinite-horizon discounted) and the greedy episode return."""
        cfg = self.config
        states = self.valid_states
        index = self.valid_index
        n = len(states)
        nxt = np.zeros((n, NUM_ACTIONS), dtype=np.int64)
        rewards = np.zeros((n, NUM_ACTIONS))
        for i, s in enumerate(states):
            for a in Action:
                s2, r, _ = self.step(s, a)
                nxt[i, a] = index[self.canonical(s2)]
                rewards[i, a] = r

        q = rewards.copy()
        for iteration in range(max_iters):
            updated = rewards + cfg.discount * q.max(axis=1)[nxt]
            delta = np.abs(updated - q).max()
            q = updated
            if delta < tol:
                break

        table = QTable(states=states, values=q, index=index)
        state, total, done = self.reset(), 0.0, False
        while not done:
            state, reward, done = self.step(state, table.greedy(self.canonical(state)))
            total += reward
        logger.info(LOG_VALUE_ITERATION_DONE, extra={"states": n, "iterations": iteration + 1,
                                                     "optimal_return": total})
        return table, total

    def rollout_return(self, policy) -> float:
        """Undiscounted episode return of `policy(state) -> Action` from the start state."""
        state, total, done = self.reset(), 0.0, False
        while not done:
            state, reward, done = self.step(state, policy(state))
            total += reward
        return total
