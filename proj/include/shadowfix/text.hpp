#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shadowfix {

/// Inclusive 1-based line range.
struct LineRange {
    std::size_t first = 1;
    std::size_t last = 1;

    [[nodiscard]] std::size_t size() const noexcept { return last >= first ? last - first + 1 : 0; }
    [[nodiscard]] bool contains(std::size_t line) const noexcept { return line >= first && line <= last; }
    [[nodiscard]] bool contains(const LineRange& other) const noexcept {
        return other.first >= first && other.last <= last;
    }

    friend bool operator==(const LineRange&, const LineRange&) = default;
};

/// A text split into lines, remembering each line's terminator so that
/// untouched lines can be written back byte-for-byte.
class LineBuffer {
public:
    LineBuffer() = default;
    explicit LineBuffer(std::string_view text);

    [[nodiscard]] std::size_t size() const noexcept { return lines_.size(); }
    [[nodiscard]] bool empty() const noexcept { return lines_.empty(); }

    /// Line content without its terminator (1-based).
    [[nodiscard]] const std::string& line(std::size_t number) const { return lines_.at(number - 1); }
    [[nodiscard]] const std::vector<std::string>& lines() const noexcept { return lines_; }

    /// The terminator used by most lines; "\n" when the text has none.
    [[nodiscard]] std::string_view dominant_eol() const noexcept;

    /// Lines over `range` joined with '\n'.
    [[nodiscard]] std::string join(const LineRange& range) const;

    /// Replaces the lines in `range` with `replacement`. Terminators of the
    /// replaced lines are reused positionally; the last replacement line
    /// inherits the terminator of the last replaced line.
    void replace(const LineRange& range, const std::vector<std::string>& replacement);

    /// Replaces `count` lines starting at `first` (1-based; `count` may be 0
    /// for a pure insertion before `first`, and `first` may be size() + 1 to
    /// append). A missing final newline stays at the end of the text.
    void splice(std::size_t first, std::size_t count, const std::vector<std::string>& replacement);

    [[nodiscard]] std::string str() const;

private:
    std::vector<std::string> lines_;
    std::vector<std::string> eols_;
};

/// Splits on '\n' (a preceding '\r' is dropped). A single trailing newline
/// does not produce an empty final line; "" yields no lines.
[[nodiscard]] std::vector<std::string> split_lines(std::string_view text);

[[nodiscard]] std::string join_lines(const std::vector<std::string>& lines, std::string_view sep = "\n");

/// Whitespace-delimited tokens.
[[nodiscard]] std::vector<std::string_view> tokenize(std::string_view text);
[[nodiscard]] std::size_t count_tokens(std::string_view text);

/// Collapses every whitespace run to one space and trims both ends.
[[nodiscard]] std::string normalize_whitespace(std::string_view text);

[[nodiscard]] std::string_view trim(std::string_view text);
[[nodiscard]] std::string trim_right(std::string_view text);

/// Lowercase hex SHA-256 of `data`.
[[nodiscard]] std::string sha256_hex(std::string_view data);

[[nodiscard]] std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

using Clock = std::chrono::system_clock;
using Instant = std::chrono::time_point<Clock, std::chrono::milliseconds>;
using Millis = std::chrono::milliseconds;

[[nodiscard]] Instant now_ms();

/// ISO-8601 UTC, e.g. "2024-03-01T12:00:00Z" or with ".250" milliseconds.
[[nodiscard]] std::string format_iso8601(Instant t);
[[nodiscard]] std::optional<Instant> parse_iso8601(std::string_view text);

}  // namespace shadowfix
