#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace csrlab::pipeline {

struct LogRecord {
    std::int64_t step = 0; // 1-based within its stage
    int stage = 0;
    std::string objective; // restore-source, restore-target, denoise-source, denoise-target, generation
    double loss = 0.0;
    double lr = 0.0;
    friend bool operator==(const LogRecord &, const LogRecord &) = default;
};

struct TrainLog {
    std::vector<LogRecord> records;
    std::vector<LogRecord> validation;  // held-out loss checkpoints, kept out of records
    std::map<int, double> wall_seconds; // per stage; never written to log files

    std::vector<LogRecord> stage_records(int stage) const;
    void append(const TrainLog &other);

    // One "step stage objective loss lr" line per record.
    void write(std::ostream &out) const;
    static TrainLog read(std::istream &in);
    void save(const std::filesystem::path &path) const;
    static TrainLog load(const std::filesystem::path &path);
};

// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

// First stage-2 step whose trailing mean loss over `window` records (fewer at
// the start of the log) is at or below threshold.
std::optional<std::int64_t> steps_to_threshold(const TrainLog &log, double threshold, std::size_t window = 10);

// Trailing-window mean of the last stage-2 record.
std::optional<double> final_smoothed_loss(const TrainLog &log, std::size_t window = 10);

} // namespace csrlab::pipeline
