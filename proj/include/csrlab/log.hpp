#pragma once

#include <string>
#include <vector>

namespace csrlab::log {

void set_quiet(bool quiet);
bool quiet();

void info(const std::string &message);
void warn(const std::string &category, const std::string &message);

// Collects warnings emitted on this thread while alive. Nested captures
// each see every warning.
class WarningCapture {
  public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture &) = delete;
    WarningCapture &operator=(const WarningCapture &) = delete;

    const std::vector<std::string> &categories() const { return categories_; }
    bool saw(const std::string &category) const;

  private:
    friend void warn(const std::string &, const std::string &);
    std::vector<std::string> categories_;
};

} // namespace csrlab::log
