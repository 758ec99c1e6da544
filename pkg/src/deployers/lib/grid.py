"""Rectangular wraparound grid used for neighbourhoods."""

from dataclasses import dataclass, field


@dataclass(frozen=True, slots=True)
class Grid:
    """Rectangular grid of cells with wraparound edges.

    Cells are numbered row-major: cell = y * width + x.
    """

    width: int
    height: int
    radius: int = 2
    _neighbourhoods: dict[int, tuple[int, ...]] = field(
        default_factory=dict, compare=False, repr=False
    )

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def neighbourhood(self, cell: int) -> tuple[int, ...]:
        """Moore neighbourhood of radius r (including the cell itself), in a fixed order."""
        cached = self._neighbourhoods.get(cell)
        if cached is not None:
            return cached
        x, y = cell % self.width, cell // self.width
        cells: list[int] = []
        for dy in range(-self.radius, self.radius + 1):
            for dx in range(-self.radius, self.radius + 1):
                nx = (x + dx) % self.width
                ny = (y + dy) % self.height
                c = ny * self.width + nx
                if c not in cells:
                    cells.append(c)
        result = tuple(cells)
        self._neighbourhoods[cell] = result
        return result


def grid_for_population(n_agents: int, radius: int, width: int | None = None, height: int | None = None) -> Grid:
    """Build a roughly square grid holding about four agents per cell."""
    if width is None or height is None:
        side = max(5, round((max(n_agents, 1) / 4) ** 0.5))
        width = width or side
        height = height or side
    return Grid(width=width, height=height, radius=radius)
