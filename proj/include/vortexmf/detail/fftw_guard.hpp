#pragma once

#include <mutex>

namespace vortexmf {
namespace detail {

// FFTW plan creation/destruction is not thread-safe; executions on distinct
// arrays are. All planning goes through this lock.
std::mutex& fftw_mutex();

}  // namespace detail
}  // namespace vortexmf
