#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cohortsieve {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorKind { usage = 1, data = 2, transport = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void raise_usage(const std::string& message);
[[noreturn]] void raise_data(const std::string& message);
[[noreturn]] void raise_transport(const std::string& message);

using Warnings = std::vector<std::string>;

// Appends to the sink when one is given, otherwise forwards to the log.
void warn(Warnings* sink, std::string message);

void set_log_sink(std::function<void(std::string_view)> sink);  // nullptr restores stderr
void log_warn(std::string_view message);

// Calendar date. Comparisons are field-lexicographic which matches calendar order.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    // Strict "YYYY-MM-DD"; rejects syntactically valid but non-existent dates.
    static std::optional<Date> parse(std::string_view text);
    bool valid() const;
    std::string str() const;

    auto operator<=>(const Date&) const = default;
};

long days_between(const Date& from, const Date& to);  // to - from, in days
Date add_days(const Date& date, long days);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view text, char delim);  // keeps empty fields
std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);

std::uint64_t fnv1a64(std::string_view bytes);
// Hex digest of fnv1a64 over "<model>\n<text>"; keys prompt caches.
std::string content_hash(std::string_view model, std::string_view text);

std::string utc_timestamp();
std::size_t count_words(std::string_view text);  // whitespace-delimited tokens

}  // namespace cohortsieve
