#include <bit>
#include <cstring>
#include <fstream>

#include "memtangle/dataset.hpp"
#include "memtangle/errors.hpp"

namespace memtangle {

namespace {

constexpr char kMagic[4] = {'M', 'D', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

// All integers little-endian, f32 IEEE-754, no padding.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("MDST: cannot open for writing: " + path.string());
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  template <typename T>
  void le(T v) {
    static_assert(std::endian::native == std::endian::little,
                  "big-endian hosts need byte swaps here");
    bytes(&v, sizeof(v));
  }
  void f32(float v) { le(v); }
  void finish() {
    out_.flush();
    if (!out_) throw DataError("MDST: write failure");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : in_(path, std::ios::binary) {
    if (!in_) throw DataError("MDST: cannot open for reading: " + path.string());
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw DataError("MDST: truncated payload");
  }
  template <typename T>
  T le() {
    static_assert(std::endian::native == std::endian::little);
    T v;
    bytes(&v, sizeof(v));
    return v;
  }

 private:
  std::ifstream in_;
};

}  // namespace

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t j = 1; j < len; ++j) {
      unsigned char cc = s[i + j];
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Reject overlong encodings, surrogates and out-of-range points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  Writer w(path);
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kVersion);
  w.le<std::uint32_t>(dataset.d_f);
  w.le<std::uint32_t>(dataset.d_c);
  w.le<std::uint64_t>(dataset.images.size());
  w.le<std::uint64_t>(dataset.sessions.size());
  for (const auto& img : dataset.images) {
    w.le<std::uint64_t>(img.image_id);
    for (float x : img.embedding) w.f32(x);
    w.le<std::uint16_t>(static_cast<std::uint16_t>(img.captions.size()));
    for (const auto& cap : img.captions) {
      if (!is_valid_utf8(cap))
        throw DataError("MDST: caption for image " +
                        std::to_string(img.image_id) + " is not valid UTF-8");
      w.le<std::uint32_t>(static_cast<std::uint32_t>(cap.size()));
      w.bytes(cap.data(), cap.size());
    }
  }
  for (const auto& session : dataset.sessions) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(session.size()));
    for (const Run& run : session) {
      w.le<std::uint32_t>(static_cast<std::uint32_t>(run.size()));
      for (const Trial& trial : run) {
        w.le<std::uint64_t>(trial.image_id);
        for (float x : trial.fmri) w.f32(x);
      }
    }
  }
  w.finish();
}

Dataset load_dataset(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("MDST: bad magic bytes");
  auto version = r.le<std::uint32_t>();
  if (version != kVersion)
    throw DataError("MDST: unsupported version " + std::to_string(version));

  Dataset d;
  d.d_f = r.le<std::uint32_t>();
  d.d_c = r.le<std::uint32_t>();
  auto n_images = r.le<std::uint64_t>();
  auto n_sessions = r.le<std::uint64_t>();

  d.images.resize(n_images);
  for (auto& img : d.images) {
    img.image_id = r.le<std::uint64_t>();
    img.embedding.resize(d.d_c);
    r.bytes(img.embedding.data(), sizeof(float) * d.d_c);
    auto n_captions = r.le<std::uint16_t>();
    img.captions.resize(n_captions);
    for (auto& cap : img.captions) {
      auto len = r.le<std::uint32_t>();
      cap.resize(len);
      r.bytes(cap.data(), len);
      if (!is_valid_utf8(cap))
        throw DataError("MDST: caption for image " +
                        std::to_string(img.image_id) + " is not valid UTF-8");
    }
  }
  d.sessions.resize(n_sessions);
  for (std::size_t s = 0; s < n_sessions; ++s) {
    auto n_runs = r.le<std::uint32_t>();
    d.sessions[s].resize(n_runs);
    for (std::uint32_t ri = 0; ri < n_runs; ++ri) {
      auto n_trials = r.le<std::uint32_t>();
      Run& run = d.sessions[s][ri];
      run.resize(n_trials);
      for (std::uint32_t t = 0; t < n_trials; ++t) {
        Trial& trial = run[t];
        trial.session_index = static_cast<std::uint32_t>(s);
        trial.run_index = ri;
        trial.trial_index = t;
        trial.image_id = r.le<std::uint64_t>();
        trial.fmri.resize(d.d_f);
        r.bytes(trial.fmri.data(), sizeof(float) * d.d_f);
      }
    }
  }
  d.validate();
  return d;
}

}  // namespace memtangle
