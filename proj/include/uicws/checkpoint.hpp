#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "uicws/autodiff.hpp"
#include "uicws/errors.hpp"

namespace uicws {

// Layout: a text manifest of `key = value` lines ending with `end`, then the
// raw little-endian values of every listed parameter in manifest order.
//
//   uicws-checkpoint
//   format_version = 1
//   dtype = f32
//   meta.<key> = <value>        (any number)
//   param = <name> <dim0> <dim1> ...
//   end

inline constexpr int kCheckpointFormatVersion = 1;

template <class Real>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<Real, float> || std::is_same_v<Real, double>);
  return std::is_same_v<Real, float> ? "f32" : "f64";
}

struct CheckpointManifest {
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
  };

  int format_version = kCheckpointFormatVersion;
  std::string dtype;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Entry> params;

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return &v;
    return nullptr;
  }
  const std::string& get(const std::string& key) const {
    if (const auto* v = find(key)) return *v;
    throw CheckpointError("checkpoint lacks meta key '" + key + "'");
  }
};

namespace detail {
template <class Real>
void write_le(std::ostream& out, const Real* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(Real)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      char bytes[sizeof(Real)];
      std::memcpy(bytes, data + i, sizeof(Real));
      std::reverse(bytes, bytes + sizeof(Real));
      out.write(bytes, sizeof(Real));
    }
  }
}

template <class Real>
void read_le(std::istream& in, Real* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(Real)));
  if (!in) throw CheckpointError("checkpoint truncated while reading values");
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) {
      char* bytes = reinterpret_cast<char*>(data + i);
      std::reverse(bytes, bytes + sizeof(Real));
    }
  }
}
}  // namespace detail

template <class Real>
void write_checkpoint(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta,
                      const std::vector<const Param<Real>*>& params) {
  out << "uicws-checkpoint\n";
  out << "format_version = " << kCheckpointFormatVersion << "\n";
  out << "dtype = " << dtype_name<Real>() << "\n";
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" =\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError("checkpoint meta entry '" + k + "' is not representable");
    }
    out << "meta." << k << " = " << v << "\n";
  }
  for (const auto* p : params) {
    out << "param = " << p->name;
    for (auto d : p->value.shape()) out << ' ' << d;
    out << "\n";
  }
  out << "end\n";
  for (const auto* p : params) detail::write_le(out, p->value.data(), p->value.size());
  if (!out) throw CheckpointError("failed writing checkpoint");
}

inline CheckpointManifest read_manifest(std::istream& in) {
  CheckpointManifest m;
  std::string line;
  if (!std::getline(in, line) || line != "uicws-checkpoint") throw CheckpointError("not a checkpoint (bad magic line)");
  bool have_version = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      if (!have_version) throw CheckpointError("checkpoint lacks format_version");
      if (m.dtype != "f32" && m.dtype != "f64") throw CheckpointError("checkpoint has unknown dtype '" + m.dtype + "'");
      return m;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw CheckpointError("malformed checkpoint manifest line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    if (key == "format_version") {
      m.format_version = std::stoi(value);
      if (m.format_version != kCheckpointFormatVersion) {
        throw CheckpointError("unsupported checkpoint format_version " + value);
      }
      have_version = true;
    } else if (key == "dtype") {
      m.dtype = value;
    } else if (key.rfind("meta.", 0) == 0) {
      m.meta.emplace_back(key.substr(5), value);
    } else if (key == "param") {
      std::istringstream fields(value);
      CheckpointManifest::Entry e;
      fields >> e.name;
      std::size_t d = 0;
      while (fields >> d) e.shape.push_back(d);
      if (e.name.empty() || e.shape.empty()) throw CheckpointError("malformed param entry: " + line);
      m.params.push_back(std::move(e));
    } else {
      throw CheckpointError("unknown checkpoint manifest key '" + key + "'");
    }
  }
  throw CheckpointError("checkpoint manifest not terminated by 'end'");
}

/// Reads the values following a manifest into freshly shaped params.
template <class Real>
std::vector<Param<Real>> read_params(std::istream& in, const CheckpointManifest& m) {
  if (m.dtype != dtype_name<Real>()) {
    throw CheckpointError(std::string("checkpoint dtype ") + m.dtype + " does not match requested " + dtype_name<Real>());
  }
  std::vector<Param<Real>> out;
  for (const auto& e : m.params) {
    Param<Real> p(e.name, Tensor<Real>(e.shape));
    detail::read_le(in, p.value.data(), p.value.size());
    out.push_back(std::move(p));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after checkpoint values");
  return out;
}

}  // namespace uicws
