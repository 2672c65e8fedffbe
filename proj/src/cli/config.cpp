#include "csrlab/config.hpp"

#include "csrlab/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace csrlab::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Thrown by value parsers; turned into a config error carrying the line.
struct BadValue {
    std::string expected;
};

template <class T>
T parse_integer(const std::string &text) {
    T value{};
    const auto *end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, value);
    if (text.empty() || r.ec != std::errc() || r.ptr != end) throw BadValue{"an integer"};
    return value;
}

double parse_double(const std::string &text) {
    double value = 0.0;
    const auto *end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, value);
    if (text.empty() || r.ec != std::errc() || r.ptr != end) throw BadValue{"a number"};
    return value;
}

bool parse_bool(const std::string &text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw BadValue{"true or false"};
}

struct Field {
    std::function<void(const std::string &)> set;
    std::function<std::string()> get;
};

using FieldTable = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>;

template <class T>
Field integer(T &ref) {
    return {[&ref](const std::string &v) { ref = parse_integer<T>(v); }, [&ref] { return std::to_string(ref); }};
}

Field real(double &ref) {
    return {[&ref](const std::string &v) { ref = parse_double(v); }, [&ref] { return pipeline::format_real(ref); }};
}

Field optional_real(std::optional<double> &ref) {
    return {[&ref](const std::string &v) {
                if (v.empty() || v == "none") ref.reset();
                else ref = parse_double(v);
            },
            [&ref] { return ref ? pipeline::format_real(*ref) : std::string("none"); }};
}

Field boolean(bool &ref) {
    return {[&ref](const std::string &v) { ref = parse_bool(v); }, [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field text(std::string &ref) {
    return {[&ref](const std::string &v) { ref = v; }, [&ref] { return ref; }};
}

Field tag(corpus::LanguageTag &ref) {
    return {[&ref](const std::string &v) {
                try {
                    ref = corpus::LanguageTag(v);
                } catch (const Error &) {
                    throw BadValue{"an uppercase language code"};
                }
            },
            [&ref] { return ref.code(); }};
}

Field path(fs::path &ref, const fs::path &base) {
    return {[&ref, base](const std::string &v) {
                if (v.empty()) ref.clear();
                else ref = fs::path(v).is_absolute() ? fs::path(v) : (base / v).lexically_normal();
            },
            [&ref] { return ref.string(); }};
}

Field retrieval(align::Retrieval &ref) {
    return {[&ref](const std::string &v) {
                try {
                    ref.kind = align::parse_retrieval(v);
                } catch (const Error &) {
                    throw BadValue{"csls or dot"};
                }
                ref.penalize = ref.kind == align::RetrievalKind::csls;
            },
            [&ref] { return std::string(ref.kind == align::RetrievalKind::csls ? "csls" : "dot"); }};
}

FieldTable fields(pipeline::RunConfig &c, const fs::path &base) {
    auto &d = c.data;
    auto &s = c.data.synth;
    auto &e = c.embed;
    auto &a = c.align;
    auto &n = c.noise;
    auto &m = c.model;
    auto &p = c.plan;
    auto &v = c.eval;
    return {
        {"data",
         {{"source", path(d.source, base)},
          {"target", path(d.target, base)},
          {"test_source", path(d.test_source, base)},
          {"test_target", path(d.test_target, base)},
          {"gold", path(d.gold, base)},
          {"source_lang", tag(d.source_lang)},
          {"target_lang", tag(d.target_lang)},
          {"dedup", boolean(d.dedup)},
          {"synth_seed", integer(s.seed)},
          {"synth_vocab", integer(s.vocab_size)},
          {"synth_sentences", integer(s.n_sentences)},
          {"synth_test", integer(s.n_test)},
          {"synth_min_len", integer(s.min_len)},
          {"synth_max_len", integer(s.max_len)},
          {"synth_zipf", real(s.zipf_exponent)},
          {"synth_coherence", real(s.coherence)},
          {"synth_successors", integer(s.successors)}}},
        {"embed",
         {{"dim", integer(e.dim)},
          {"window", integer(e.window)},
          {"negatives", integer(e.negatives)},
          {"epochs", integer(e.epochs)},
          {"lr", real(e.lr)},
          {"min_count", integer(e.min_count)},
          {"shuffle", boolean(e.shuffle)},
          {"seed", integer(e.seed)}}},
        {"align",
         {{"normalize", text(a.normalize)},
          {"seed_method", text(a.seed_method)},
          {"retrieval", retrieval(a.retrieval)},
          {"neighborhood", integer(a.retrieval.neighborhood)},
          {"k", integer(a.k)},
          {"max_iter", integer(a.max_iter)},
          {"induction_limit", integer(a.induction_limit)}}},
        {"noise",
         {{"ratio", real(n.ratio)},
          {"poisson_lambda", real(n.poisson_lambda)},
          {"k", integer(n.k)},
          {"seed", integer(n.seed)}}},
        {"model",
         {{"dim", integer(m.dim)},
          {"layers", integer(m.layers)},
          {"heads", integer(m.heads)},
          {"ffn_dim", integer(m.ffn_dim)},
          {"dropout", real(m.dropout)},
          {"max_len", integer(m.max_len)}}},
        {"plan",
         {{"stage1_steps", integer(p.stage1_steps)},
          {"stage2_steps", integer(p.stage2_steps)},
          {"batch_size", integer(p.batch_size)},
          {"eval_every", integer(p.eval_every)},
          {"data_seed", integer(p.data_seed)},
          {"model_seed", integer(p.model_seed)},
          {"peak_lr", real(p.peak_lr)},
          {"warmup_fraction", real(p.warmup_fraction)},
          {"label_smoothing", real(p.label_smoothing)},
          {"interleave_denoise", boolean(p.interleave_denoise)}}},
        {"eval",
         {{"beam", integer(v.beam)},
          {"length_penalty", real(v.length_penalty)},
          {"decode_max_len", integer(v.decode_max_len)},
          {"low_threshold", integer(v.low_threshold)},
          {"high_threshold", integer(v.high_threshold)},
          {"distance_subset", integer(v.distance_subset)},
          {"threshold", optional_real(v.threshold)},
          {"window", integer(v.window)}}},
    };
}

[[noreturn]] void fail(std::size_t line, const std::string &message) {
    throw Error(ErrorKind::config, "line " + std::to_string(line) + ": " + message);
}

} // namespace

pipeline::RunConfig parse_config_text(const std::string &content, const fs::path &base_dir) {
    pipeline::RunConfig config;
    const auto table = fields(config, base_dir);
    const std::vector<std::pair<std::string, Field>> *section = nullptr;
    std::string section_name;

    std::istringstream in(content);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "malformed section header '" + line + "'");
            section_name = trim(std::string_view(line).substr(1, line.size() - 2));
            section = nullptr;
            for (const auto &[name, entries] : table)
                if (name == section_name) section = &entries;
            if (!section) fail(line_no, "unknown section '" + section_name + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected 'key = value', got '" + line + "'");
        const auto key = trim(std::string_view(line).substr(0, eq));
        const auto value = trim(std::string_view(line).substr(eq + 1));
        if (!section) fail(line_no, "key '" + key + "' outside of a section");
        const Field *field = nullptr;
        for (const auto &[name, f] : *section)
            if (name == key) field = &f;
        if (!field) fail(line_no, "unknown key '" + key + "' in section [" + section_name + "]");
        try {
            field->set(value);
        } catch (const BadValue &bad) {
            fail(line_no, "'" + section_name + "." + key + "' expects " + bad.expected + ", got '" + value + "'");
        }
    }

    try {
        config.validate();
    } catch (const Error &e) {
        throw Error(ErrorKind::config, e.what());
    }
    return config;
}

pipeline::RunConfig parse_config(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open config " + path.string());
    std::ostringstream content;
    content << in.rdbuf();
    return parse_config_text(content.str(), fs::absolute(path).parent_path());
}

std::string render_config(const pipeline::RunConfig &config) {
    auto copy = config;
    std::ostringstream out;
    bool first = true;
    for (const auto &[section, entries] : fields(copy, {})) {
        if (!first) out << '\n';
        first = false;
        out << '[' << section << "]\n";
        for (const auto &[key, field] : entries) out << key << " = " << field.get() << '\n';
    }
    return out.str();
}

} // namespace csrlab::cli
