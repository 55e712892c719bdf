// SPDX-License-Identifier: Apache-2.0
#include "sikv/core.hpp"

#include <algorithm>
#include <sstream>

namespace sikv {

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (lead < 0x80) {
      ++i;
      continue;
    } else if ((lead & 0xE0) == 0xC0) {
      extra = 1;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      extra = 2;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      extra = 3;
      cp = lead & 0x07;
    } else {
      return false;
    }
    if (i + extra >= text.size()) return false;
    for (std::size_t j = 1; j <= extra; ++j) {
      const auto cont = static_cast<unsigned char>(text[i + j]);
      if ((cont & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cont & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

bool is_valid_key(std::string_view key) {
  if (key.empty() || !is_valid_utf8(key)) return false;
  return std::none_of(key.begin(), key.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x20 || u == 0x7F;
  });
}

bool is_valid_value(std::string_view value) {
  return is_valid_utf8(value) && value.find('\n') == std::string_view::npos;
}

void require_valid_key(std::string_view key) {
  if (!is_valid_key(key)) {
    throw ContractViolation("invalid key: must be non-empty UTF-8 without control characters");
  }
}

void require_valid_value(std::string_view value) {
  if (!is_valid_value(value)) {
    throw ContractViolation("invalid value: must be UTF-8 without a newline");
  }
}

bool is_well_formed(const KeyHistory& history) {
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (!(history[i - 1].commit_ts > history[i].commit_ts)) return false;
  }
  return true;
}

const KeyHistory& history_of(const Store& store, const Key& key) {
  static const KeyHistory empty;
  const auto it = store.find(key);
  return it == store.end() ? empty : it->second;
}

std::optional<Value> version_lookup(const KeyHistory& history,
                                    Timestamp start_ts) {
  for (const Version& version : history) {
    if (version.commit_ts == start_ts) {
      throw ProtocolViolation("version committed at start timestamp " +
                              to_string(start_ts));
    }
    if (version.commit_ts < start_ts) return version.value;
  }
  return std::nullopt;
}

bool check_key(const KeyHistory& history, Timestamp start_ts) {
  return history.empty() || history.front().commit_ts < start_ts;
}

bool can_commit(const Store& current, const Store& snapshot,
                const WriteSet& writes) {
  for (const auto& [key, entry] : writes) {
    if (!entry.updated) continue;
    const auto now = current.find(key);
    const auto then = snapshot.find(key);
    if (now == current.end() || then == snapshot.end()) {
      throw ContractViolation("can_commit: written key '" + key +
                              "' missing from store or snapshot");
    }
    if (now->second != then->second) return false;
  }
  return true;
}

void apply_commit_in_place(Store& store, const WriteSet& writes,
                           Timestamp commit_ts) {
  for (const auto& [key, history] : store) {
    if (!history.empty() && !(commit_ts > history.front().commit_ts)) {
      throw ContractViolation("apply_commit: commit timestamp " +
                              to_string(commit_ts) + " is not fresh");
    }
  }
  for (const auto& [key, entry] : writes) {
    if (!entry.updated) continue;
    auto& history = store[key];
    history.insert(history.begin(), Version{entry.value, commit_ts});
  }
}

Store apply_commit(Store store, const WriteSet& writes, Timestamp commit_ts) {
  apply_commit_in_place(store, writes, commit_ts);
  return store;
}

bool is_cut(Timestamp t, const KeyHistory& prefix, const KeyHistory& full) {
  if (prefix.size() > full.size()) return false;
  const std::size_t newer = full.size() - prefix.size();
  if (!std::equal(prefix.begin(), prefix.end(), full.begin() + newer)) {
    return false;
  }
  const bool old_below = std::all_of(prefix.begin(), prefix.end(),
                                     [&](const Version& v) { return v.commit_ts < t; });
  const bool new_above = std::all_of(full.begin(), full.begin() + newer,
                                     [&](const Version& v) { return v.commit_ts > t; });
  return old_below && new_above;
}

std::string to_string(Timestamp ts) { return std::to_string(ts.tick); }

std::string to_string(const KeyHistory& history) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) out << ',';
    out << "(\"" << history[i].value << "\"," << history[i].commit_ts.tick << ')';
  }
  out << ']';
  return out.str();
}

}  // namespace sikv
