#ifndef VEILBLOCK_BENCH_HPP
#define VEILBLOCK_BENCH_HPP

#include <functional>
#include <string>
#include <vector>

#include "veilblock/enforcer.hpp"
#include "veilblock/pir.hpp"

namespace veilblock::bench {

inline constexpr std::size_t kMinIterations = 200;
inline constexpr const char* kCsvHeader = "operation,device,iterations,mean_us,p50_us,p95_us,payload_bytes";

struct BenchRecord {
    std::string operation;
    std::string device;
    std::size_t iterations = 0;
    double mean_us = 0;
    double p50_us = 0;
    double p95_us = 0;
    std::size_t payload_bytes = 0;
};

std::string to_csv_row(const BenchRecord& r);

// Times fn() `iterations` times (at least kMinIterations). setup() runs
// before each timed call and is excluded from the measurement.
BenchRecord measure(std::string operation, std::string device, std::size_t iterations, std::size_t payload_bytes,
                    const std::function<void()>& fn, const std::function<void()>& setup = {});

struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// Per-entry size model for j curators, in bytes.
constexpr std::size_t model_entry_bytes(std::size_t curators) { return (256 + 16 + 512 * curators) / 8; }
// Serialized size of one snapshot record with j signatures.
constexpr std::size_t record_entry_bytes(std::size_t curators) { return 32 + 1 + 66 * curators; }

// Random, well-formed records (sorted, distinct ids), each signed by
// `curators` slots. Not derived from real objects.
std::vector<enforcer::BlindedRecord> synthetic_records(std::size_t n, std::size_t curators);
std::vector<std::string> synthetic_curators(std::size_t curators);

// A bucketed database with exactly 2^k buckets of ceil(elements / 2^k)
// slots each, filled with random bytes.
pir::BucketedDB synthetic_buckets(std::size_t elements, unsigned k, std::size_t curators = 1);

// PIR scaling rows for N = 4096: prefix bits S = 6..15 and element counts.
struct PirRow {
    unsigned prefix_bits;
    std::size_t elements;
};
std::vector<PirRow> pir_scaling_rows();

struct BenchOptions {
    std::size_t iterations = kMinIterations;
    std::string device = "desktop";
    std::size_t psi_small = 1000;
    std::size_t psi_large = 1000000;
    std::vector<std::size_t> verify_sizes = {50000, 1000000};
    std::vector<PirRow> pir_rows = pir_scaling_rows();
    std::size_t plaintext_slot_bytes = 10240;
};

struct BenchSummary {
    std::vector<BenchRecord> records;
    // mean(server PSI at psi_large) / mean(server PSI at psi_small)
    double psi_ratio = 0;
    // PIR answer mean vs element count.
    LinearFit pir_fit;
};

// Each record is passed to sink as soon as it is measured.
BenchSummary run_suite(const BenchOptions& options, const std::function<void(const BenchRecord&)>& sink = {});

}  // namespace veilblock::bench

#endif  // VEILBLOCK_BENCH_HPP
