#pragma once

#include <cstddef>
#include <functional>

namespace ncgl {

// NC_GRAPH_LAB_THREADS, else 1. Results never depend on this value.
std::size_t default_thread_count();
void set_thread_count(std::size_t threads);
std::size_t thread_count();

// Splits [0, count) into contiguous blocks, one per worker.
void parallel_for(std::size_t count, const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace ncgl
