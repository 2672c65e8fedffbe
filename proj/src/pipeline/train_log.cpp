#include "csrlab/train_log.hpp"

#include "csrlab/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace csrlab::pipeline {

std::vector<LogRecord> TrainLog::stage_records(int stage) const {
    std::vector<LogRecord> out;
    for (const auto &r : records)
        if (r.stage == stage) out.push_back(r);
    return out;
}

void TrainLog::append(const TrainLog &other) {
    records.insert(records.end(), other.records.begin(), other.records.end());
    for (const auto &[stage, seconds] : other.wall_seconds) wall_seconds[stage] += seconds;
}

std::string format_real(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return {buf, res.ptr};
}

void TrainLog::write(std::ostream &out) const {
    for (const auto &r : records)
        out << r.step << ' ' << r.stage << ' ' << r.objective << ' ' << format_real(r.loss) << ' ' << format_real(r.lr)
            << '\n';
}

TrainLog TrainLog::read(std::istream &in) {
    TrainLog log;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        std::istringstream fields(line);
        LogRecord r;
        std::string loss, lr, extra;
        if (!(fields >> r.step >> r.stage >> r.objective >> loss >> lr) || (fields >> extra))
            throw Error(ErrorKind::format, "malformed log line " + std::to_string(number));
        auto parse = [&](const std::string &text) {
            double v = 0.0;
            const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
            if (res.ec != std::errc() || res.ptr != text.data() + text.size())
                throw Error(ErrorKind::parse, "bad number '" + text + "' on log line " + std::to_string(number));
            return v;
        };
        r.loss = parse(loss);
        r.lr = parse(lr);
        log.records.push_back(std::move(r));
    }
    return log;
}

void TrainLog::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    write(out);
}

TrainLog TrainLog::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    return read(in);
}

namespace {

std::vector<double> smoothed_stage2(const TrainLog &log, std::size_t window, std::vector<std::int64_t> &steps) {
    if (window == 0) throw Error(ErrorKind::parameter, "smoothing window must be positive");
    std::vector<double> losses, out;
    for (const auto &r : log.records)
        if (r.stage == 2) {
            losses.push_back(r.loss);
            steps.push_back(r.step);
        }
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const std::size_t first = i + 1 > window ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t j = first; j <= i; ++j) sum += losses[j];
        out.push_back(sum / static_cast<double>(i + 1 - first));
    }
    return out;
}

} // namespace

std::optional<std::int64_t> steps_to_threshold(const TrainLog &log, double threshold, std::size_t window) {
    std::vector<std::int64_t> steps;
    const auto smooth = smoothed_stage2(log, window, steps);
    for (std::size_t i = 0; i < smooth.size(); ++i)
        if (smooth[i] <= threshold) return steps[i];
    return std::nullopt;
}

std::optional<double> final_smoothed_loss(const TrainLog &log, std::size_t window) {
    std::vector<std::int64_t> steps;
    const auto smooth = smoothed_stage2(log, window, steps);
    if (smooth.empty()) return std::nullopt;
    return smooth.back();
}

} // namespace csrlab::pipeline
