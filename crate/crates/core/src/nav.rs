//! Route planning on the occupancy grid: 8-connected A* with an
//! obstacle-proximity penalty, plus line-of-sight path shortening.

use crate::geometry::Point;
use crate::world::{Cell, OccupancyGrid};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use thiserror::Error;

/// Clearance beyond which a cell carries no proximity penalty, meters.
pub const PROXIMITY_HORIZON: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NavError {
    #[error("start lies outside the grid or in an occupied cell")]
    StartOccupied,
    #[error("goal lies outside the grid or in an occupied cell")]
    GoalOccupied,
    #[error("no path between start and goal")]
    NoPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub waypoints: Vec<Point>,
    /// Path length plus weighted proximity penalty, meters.
    pub cost: f64,
    pub straight_moves: usize,
    pub diagonal_moves: usize,
}

impl GridPath {
    /// Geometric length of the cell path, meters.
    pub fn length(&self, resolution: f64) -> f64 {
        (self.straight_moves as f64 + self.diagonal_moves as f64 * SQRT_2) * resolution
    }
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// 8-neighbors of `cell` reachable without cutting an occupied corner.
pub fn neighbors(grid: &OccupancyGrid, (i, j): Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
    NEIGHBORS.iter().filter_map(move |&(di, dj)| {
        let (ni, nj) = (i as i64 + di, j as i64 + dj);
        if !grid.in_grid(ni, nj) || grid.is_occupied((ni as usize, nj as usize)) {
            return None;
        }
        let diagonal = di != 0 && dj != 0;
        if diagonal && (grid.is_occupied((ni as usize, j)) || grid.is_occupied((i, nj as usize))) {
            return None;
        }
        Some(((ni as usize, nj as usize), diagonal))
    })
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
}

#[derive(Debug, PartialEq)]
struct Entry {
    f: f64,
    h: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest (f, h, index).
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.h.total_cmp(&self.h)).then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Plan between world points; waypoints end at the exact goal point.
pub fn plan_path(grid: &OccupancyGrid, start: &Point, goal: &Point, proximity_weight: f64) -> Result<GridPath, NavError> {
    let s = grid.world_to_cell(start).filter(|&c| !grid.is_occupied(c)).ok_or(NavError::StartOccupied)?;
    let g = grid.world_to_cell(goal).filter(|&c| !grid.is_occupied(c)).ok_or(NavError::GoalOccupied)?;
    let mut path = plan_cells(grid, s, g, proximity_weight)?;
    if let Some(last) = path.waypoints.last_mut() {
        *last = *goal;
    }
    Ok(path)
}

/// A* between cells. Step cost is the move length (1 or √2 cells, scaled by
/// resolution) plus `proximity_weight × max(0, 1 − clearance/horizon)` of the
/// entered cell; the octile heuristic stays admissible since the penalty is
/// non-negative.
pub fn plan_cells(grid: &OccupancyGrid, start: Cell, goal: Cell, proximity_weight: f64) -> Result<GridPath, NavError> {
    if !grid.in_grid(start.0 as i64, start.1 as i64) || grid.is_occupied(start) {
        return Err(NavError::StartOccupied);
    }
    if !grid.in_grid(goal.0 as i64, goal.1 as i64) || grid.is_occupied(goal) {
        return Err(NavError::GoalOccupied);
    }
    let res = grid.resolution;
    let weight = proximity_weight.max(0.0);
    let penalty: Vec<f64> = if weight > 0.0 {
        grid.clearance_field(PROXIMITY_HORIZON)
            .into_iter()
            .map(|c| weight * (1.0 - c / PROXIMITY_HORIZON).max(0.0))
            .collect()
    } else {
        Vec::new()
    };

    let n = grid.len();
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let start_index = grid.index(start);
    let goal_index = grid.index(goal);
    best[start_index] = 0.0;
    let h0 = octile(start, goal) * res;
    heap.push(Entry { f: h0, h: h0, index: start_index });

    while let Some(Entry { index, .. }) = heap.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == goal_index {
            break;
        }
        let cell = grid.cell_of(index);
        for (next, diagonal) in neighbors(grid, cell) {
            let ni = grid.index(next);
            if closed[ni] {
                continue;
            }
            let step = if diagonal { SQRT_2 } else { 1.0 } * res;
            let g = best[index] + step + penalty.get(ni).copied().unwrap_or(0.0);
            if g < best[ni] {
                best[ni] = g;
                parent[ni] = index;
                let h = octile(next, goal) * res;
                heap.push(Entry { f: g + h, h, index: ni });
            }
        }
    }
    if !closed[goal_index] {
        return Err(NavError::NoPath);
    }

    let mut indices = vec![goal_index];
    while *indices.last().unwrap() != start_index {
        indices.push(parent[*indices.last().unwrap()]);
    }
    indices.reverse();
    let cells: Vec<Cell> = indices.iter().map(|&i| grid.cell_of(i)).collect();
    let diagonal_moves = cells.windows(2).filter(|w| w[0].0 != w[1].0 && w[0].1 != w[1].1).count();
    let straight_moves = cells.len() - 1 - diagonal_moves;
    let proximity: f64 = indices[1..].iter().map(|&i| penalty.get(i).copied().unwrap_or(0.0)).sum();
    let mut path = GridPath {
        cost: (straight_moves as f64 + diagonal_moves as f64 * SQRT_2) * res + proximity,
        cells,
        waypoints: Vec::new(),
        straight_moves,
        diagonal_moves,
    };
    path.waypoints = decimate(&path, grid);
    Ok(path)
}

/// Whether the straight segment between two cell centers touches only free
/// cells. Passing exactly through a cell corner requires both side cells free.
pub fn line_of_sight(grid: &OccupancyGrid, a: Cell, b: Cell) -> bool {
    let (dx, dy) = (b.0 as f64 - a.0 as f64, b.1 as f64 - a.1 as f64);
    let (si, sj) = (dx.signum() as i64, dy.signum() as i64);
    let (mut i, mut j) = (a.0 as i64, a.1 as i64);
    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    // Centers sit half a cell from each boundary.
    let mut t_max_x = 0.5 * t_delta_x;
    let mut t_max_y = 0.5 * t_delta_y;
    let blocked = |i: i64, j: i64| !grid.in_grid(i, j) || grid.is_occupied((i as usize, j as usize));
    loop {
        if blocked(i, j) {
            return false;
        }
        if (i, j) == (b.0 as i64, b.1 as i64) {
            return true;
        }
        if (t_max_x - t_max_y).abs() < 1e-12 {
            if blocked(i + si, j) || blocked(i, j + sj) {
                return false;
            }
            i += si;
            j += sj;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        } else if t_max_x < t_max_y {
            i += si;
            t_max_x += t_delta_x;
        } else {
            j += sj;
            t_max_y += t_delta_y;
        }
    }
}

/// Greedy line-of-sight shortening: from each kept cell jump to the
/// farthest later cell still in sight. Endpoints are always kept.
pub fn decimate(path: &GridPath, grid: &OccupancyGrid) -> Vec<Point> {
    let cells = &path.cells;
    if cells.is_empty() {
        return Vec::new();
    }
    let mut kept = vec![0];
    let mut anchor = 0;
    while anchor < cells.len() - 1 {
        let mut next = anchor + 1;
        for j in (anchor + 2..cells.len()).rev() {
            if line_of_sight(grid, cells[anchor], cells[j]) {
                next = j;
                break;
            }
        }
        kept.push(next);
        anchor = next;
    }
    kept.into_iter().map(|k| grid.cell_center(cells[k])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(rows: &[&str]) -> OccupancyGrid {
        // Rows listed top (max y) first.
        let height = rows.len();
        let width = rows[0].len();
        let mut cells = vec![false; width * height];
        for (r, row) in rows.iter().enumerate() {
            for (i, ch) in row.chars().enumerate() {
                cells[(height - 1 - r) * width + i] = ch == '#';
            }
        }
        OccupancyGrid::from_cells(width, height, 1.0, cells)
    }

    #[test]
    fn empty_grid_diagonal() {
        let grid = OccupancyGrid::free(10, 10);
        let path = plan_cells(&grid, (0, 0), (9, 9), 0.0).unwrap();
        assert_eq!(path.cost, 9.0 * SQRT_2);
        assert_eq!(path.diagonal_moves, 9);
        assert_eq!(path.waypoints.len(), 2);
    }

    #[test]
    fn wall_means_no_path() {
        let grid = grid_from(&["..#..", "..#..", "..#..", "..#..", "..#.."]);
        assert_eq!(plan_cells(&grid, (0, 0), (4, 4), 0.0), Err(NavError::NoPath));
    }

    #[test]
    fn occupied_endpoints() {
        let grid = grid_from(&["#...", "....", "...#"]);
        assert_eq!(plan_cells(&grid, (3, 0), (1, 1), 0.0), Err(NavError::StartOccupied));
        assert_eq!(plan_cells(&grid, (1, 1), (0, 2), 0.0), Err(NavError::GoalOccupied));
        assert_eq!(plan_path(&grid, &Point::new(-1.0, 0.5), &Point::new(1.5, 1.5), 0.0), Err(NavError::StartOccupied));
    }

    #[test]
    fn no_corner_cutting() {
        let grid = grid_from(&["..", "#."]);
        // (0,1) → (1,0) would cut the occupied (0,0) corner.
        let path = plan_cells(&grid, (0, 1), (1, 0), 0.0).unwrap();
        assert_eq!(path.cells, vec![(0, 1), (1, 1), (1, 0)]);
    }

    #[test]
    fn corridor_decimates_to_endpoints() {
        let grid = grid_from(&["#######", ".......", "#######"]);
        let path = plan_cells(&grid, (0, 1), (6, 1), 0.0).unwrap();
        assert_eq!(path.waypoints, vec![Point::new(0.5, 1.5), Point::new(6.5, 1.5)]);
    }

    #[test]
    fn l_shaped_path_keeps_corner() {
        let grid = grid_from(&["####.", "####.", "####.", "####.", "....."]);
        let path = plan_cells(&grid, (0, 0), (4, 4), 0.0).unwrap();
        assert_eq!(path.waypoints, vec![Point::new(0.5, 0.5), Point::new(4.5, 0.5), Point::new(4.5, 4.5)]);
    }

    #[test]
    fn two_point_path_unchanged() {
        let grid = OccupancyGrid::free(3, 3);
        let path = plan_cells(&grid, (0, 0), (1, 0), 0.0).unwrap();
        assert_eq!(decimate(&path, &grid), path.waypoints);
        assert_eq!(path.waypoints.len(), 2);
    }

    #[test]
    fn proximity_pushes_path_away() {
        let grid = grid_from(&["..........", "..........", "..........", "..........", "....#....."]);
        let near = plan_cells(&grid, (0, 0), (9, 0), 0.0).unwrap();
        let far = plan_cells(&grid, (0, 0), (9, 0), 10.0).unwrap();
        let max_y = |p: &GridPath| p.cells.iter().map(|c| c.1).max().unwrap();
        assert!(max_y(&far) > max_y(&near));
    }
}
