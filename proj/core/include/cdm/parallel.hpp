#ifndef CDM_PARALLEL_HPP_
#define CDM_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace cdm {

/// Worker count used by parallel_for. Defaults to the hardware concurrency,
/// overridable with the CDM_THREADS environment variable or set_thread_count.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Calls body(i) for every i in [0, n), spread over thread_count() workers.
/// Calls made from inside a running parallel_for execute serially on the
/// calling thread. The first exception thrown by any body is rethrown after
/// all workers have stopped.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cdm

#endif  // CDM_PARALLEL_HPP_
