#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace coxplain {

/// Minimal streaming JSON emitter. Keys appear exactly in the order written,
/// doubles are printed with 17 significant digits, and output is byte-stable
/// for identical inputs. Used for every file this project writes; parsing is
/// delegated to nlohmann/json.
class JsonWriter {
 public:
  explicit JsonWriter(int indent = 2) : indent_(indent) {}

  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view k);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();

  /// Convenience: key followed by value.
  template <typename T>
  JsonWriter& kv(std::string_view k, T v) {
    key(k);
    return value(v);
  }

  const std::string& str() const { return out_; }

 private:
  void before_value();
  void newline();

  std::string out_;
  int indent_;
  std::vector<bool> first_in_scope_;
  bool pending_key_ = false;
};

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

}  // namespace coxplain
