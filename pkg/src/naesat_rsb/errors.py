"""Exception types; ``exit_code`` is what the CLI returns for each."""


class NaesatError(Exception):
    exit_code = 1


class InvalidInput(NaesatError, ValueError):
    exit_code = 2


class NonConvergence(NaesatError, RuntimeError):
    exit_code = 3

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = [] if trajectory is None else list(trajectory)


class ResourceLimit(NaesatError, RuntimeError):
    exit_code = 4
