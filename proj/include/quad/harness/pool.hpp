#pragma once

#include <functional>
#include <vector>

namespace quad::harness {

// QUAD_NUM_WORKERS, defaulting to hardware concurrency.
int worker_count();

// Runs the jobs on a bounded pool and joins; each job owns its outputs, so
// callers aggregate in job order afterwards for deterministic artifacts.
void run_parallel(const std::vector<std::function<void()>>& jobs, int workers = 0);

}  // namespace quad::harness
