#include "csrlab/error.hpp"
#include "csrlab/log.hpp"
#include "csrlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace csrlab {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::empty_corpus: return "empty-corpus";
    case ErrorKind::decode: return "decode";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::format: return "format";
    case ErrorKind::parse: return "parse";
    case ErrorKind::normalization: return "normalization";
    case ErrorKind::seeding: return "seeding";
    case ErrorKind::index: return "index";
    case ErrorKind::degenerate_batch: return "degenerate-batch";
    case ErrorKind::degenerate_corpus: return "degenerate-corpus";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::pairing: return "pairing";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int Rng::poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform();
    } while (p > limit);
    return k - 1;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace log {

namespace {
bool g_quiet = false;
thread_local std::vector<WarningCapture *> g_captures;
} // namespace

void set_quiet(bool quiet) { g_quiet = quiet; }
bool quiet() { return g_quiet; }

void info(const std::string &message) {
    if (!g_quiet) std::cerr << message << '\n';
}

void warn(const std::string &category, const std::string &message) {
    for (auto *capture : g_captures) capture->categories_.push_back(category);
    if (g_captures.empty() && !g_quiet)
        std::cerr << "warning: " << category << ": " << message << '\n';
}

WarningCapture::WarningCapture() { g_captures.push_back(this); }

WarningCapture::~WarningCapture() {
    g_captures.erase(std::remove(g_captures.begin(), g_captures.end(), this), g_captures.end());
}

bool WarningCapture::saw(const std::string &category) const {
    return std::find(categories_.begin(), categories_.end(), category) != categories_.end();
}

} // namespace log
} // namespace csrlab
