#include "m2gan/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "m2gan/rng.hpp"

namespace m2gan {

namespace {

// Unicode Nd (decimal digit) ranges. Letter numerals (e.g. Roman numeral
// codepoints, category Nl) are deliberately absent: only decimal digits
// trigger the filter.
constexpr std::pair<uint32_t, uint32_t> kDecimalDigitRanges[] = {
    {0x0030, 0x0039},   {0x0660, 0x0669},   {0x06F0, 0x06F9},   {0x07C0, 0x07C9},
    {0x0966, 0x096F},   {0x09E6, 0x09EF},   {0x0A66, 0x0A6F},   {0x0AE6, 0x0AEF},
    {0x0B66, 0x0B6F},   {0x0BE6, 0x0BEF},   {0x0C66, 0x0C6F},   {0x0CE6, 0x0CEF},
    {0x0D66, 0x0D6F},   {0x0DE6, 0x0DEF},   {0x0E50, 0x0E59},   {0x0ED0, 0x0ED9},
    {0x0F20, 0x0F29},   {0x1040, 0x1049},   {0x1090, 0x1099},   {0x17E0, 0x17E9},
    {0x1810, 0x1819},   {0x1946, 0x194F},   {0x19D0, 0x19D9},   {0x1A80, 0x1A89},
    {0x1A90, 0x1A99},   {0x1B50, 0x1B59},   {0x1BB0, 0x1BB9},   {0x1C40, 0x1C49},
    {0x1C50, 0x1C59},   {0xA620, 0xA629},   {0xA8D0, 0xA8D9},   {0xA900, 0xA909},
    {0xA9D0, 0xA9D9},   {0xA9F0, 0xA9F9},   {0xAA50, 0xAA59},   {0xABF0, 0xABF9},
    {0xFF10, 0xFF19},   {0x104A0, 0x104A9}, {0x10D30, 0x10D39}, {0x11066, 0x1106F},
    {0x110F0, 0x110F9}, {0x11136, 0x1113F}, {0x111D0, 0x111D9}, {0x112F0, 0x112F9},
    {0x11450, 0x11459}, {0x114D0, 0x114D9}, {0x11650, 0x11659}, {0x116C0, 0x116C9},
    {0x11730, 0x11739}, {0x118E0, 0x118E9}, {0x11950, 0x11959}, {0x11C50, 0x11C59},
    {0x11D50, 0x11D59}, {0x11DA0, 0x11DA9}, {0x16A60, 0x16A69}, {0x16B50, 0x16B59},
    {0x1D7CE, 0x1D7FF}, {0x1E140, 0x1E149}, {0x1E2F0, 0x1E2F9}, {0x1E950, 0x1E959},
    {0x1FBF0, 0x1FBF9},
};

bool is_decimal_digit(uint32_t cp) {
  for (auto [lo, hi] : kDecimalDigitRanges) {
    if (cp >= lo && cp <= hi) return true;
  }
  return false;
}

// Minimal UTF-8 decoding; malformed bytes are treated as non-digits.
uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra = 0;
  uint32_t cp = 0;
  if ((c & 0xE0) == 0xC0) {
    cp = c & 0x1F;
    extra = 1;
  } else if ((c & 0xF0) == 0xE0) {
    cp = c & 0x0F;
    extra = 2;
  } else if ((c & 0xF8) == 0xF0) {
    cp = c & 0x07;
    extra = 3;
  } else {
    ++i;
    return 0xFFFD;
  }
  ++i;
  for (int k = 0; k < extra; ++k) {
    if (i >= s.size() || (static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) return 0xFFFD;
    cp = (cp << 6) | (static_cast<unsigned char>(s[i]) & 0x3F);
    ++i;
  }
  return cp;
}

// -- base64 (standard alphabet, '=' padding) --------------------------------

constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    uint32_t chunk = static_cast<uint32_t>(data[i]) << 16;
    if (i + 1 < n) chunk |= static_cast<uint32_t>(data[i + 1]) << 8;
    if (i + 2 < n) chunk |= data[i + 2];
    out.push_back(kB64Alphabet[(chunk >> 18) & 63]);
    out.push_back(kB64Alphabet[(chunk >> 12) & 63]);
    out.push_back(i + 1 < n ? kB64Alphabet[(chunk >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? kB64Alphabet[chunk & 63] : '=');
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<unsigned char> base64_decode(const std::string& s) {
  if (s.size() % 4 != 0) throw DataError("base64: length not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    uint32_t chunk = 0;
    for (int k = 0; k < 4; ++k) {
      char c = s[i + k];
      if (c == '=') {
        ++pad;
        chunk <<= 6;
        continue;
      }
      int v = b64_value(c);
      if (v < 0 || pad > 0) throw DataError("base64: invalid character");
      chunk = (chunk << 6) | static_cast<uint32_t>(v);
    }
    out.push_back(static_cast<unsigned char>((chunk >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<unsigned char>((chunk >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<unsigned char>(chunk & 0xFF));
  }
  return out;
}

// -- number formatting: shortest round-trip representation ------------------

std::string fmt_float(float v) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_double(double v) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename Num>
Num parse_num(const std::string& s, long line, const char* what) {
  Num v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("corpus parse error at line " + std::to_string(line) + ": bad " + what +
                    " value '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// pronounceable two-letter syllable per token id, digits never appear
std::string token_word(int token_id) {
  static const char consonants[] = "bdfgklmnprstv";
  static const char vowels[] = "aeiou";
  std::string w;
  w.push_back(consonants[token_id % 13]);
  w.push_back(vowels[(token_id / 13) % 5]);
  if (token_id >= 65) w.push_back(consonants[(token_id / 65) % 13]);
  return w;
}

}  // namespace

bool filter_numerals(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_decimal_digit(decode_utf8(text, i))) return false;
  }
  return true;
}

double CorpusModel::expected_pitch_std(const CorpusSpec& spec, int token) const {
  double c = pitch_contour[static_cast<std::size_t>(token)];
  return std::sqrt(spec.style_std * spec.style_std * c * c + spec.noise_std * spec.noise_std);
}

std::vector<double> CorpusModel::expected_frame_mean(const CorpusSpec& spec, int token,
                                                     int speaker) const {
  std::vector<double> mean(static_cast<std::size_t>(spec.mel_dim));
  double expected_pitch = base_pitch[static_cast<std::size_t>(token)] +
                          speaker_pitch_offset[static_cast<std::size_t>(speaker)];
  for (int d = 0; d < spec.mel_dim; ++d) {
    std::size_t td = static_cast<std::size_t>(token) * spec.mel_dim + d;
    std::size_t sd = static_cast<std::size_t>(speaker) * spec.mel_dim + d;
    mean[static_cast<std::size_t>(d)] =
        token_wave[td] + speaker_timbre[sd] + expected_pitch * harmonic[td];
  }
  return mean;
}

std::vector<int> Corpus::train_indices() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(records.size()); ++i)
    if (!is_test_speaker(records[static_cast<std::size_t>(i)].speaker_id)) out.push_back(i);
  return out;
}

std::vector<int> Corpus::test_indices() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(records.size()); ++i)
    if (is_test_speaker(records[static_cast<std::size_t>(i)].speaker_id)) out.push_back(i);
  return out;
}

CorpusModel derive_corpus_model(const CorpusSpec& spec) {
  CorpusModel m;
  int v = spec.vocab_size, s = spec.n_speakers, d = spec.mel_dim;
  Rng rng = Rng::substream(spec.seed, "corpus_tables");
  m.base_pitch.resize(v);
  m.pitch_contour.resize(v);
  m.base_energy.resize(v);
  m.energy_contour.resize(v);
  m.base_duration.resize(v);
  m.token_wave.resize(static_cast<std::size_t>(v) * d);
  m.harmonic.resize(static_cast<std::size_t>(v) * d);
  for (int t = 0; t < v; ++t) {
    m.base_pitch[t] = rng.uniform(-spec.base_pitch_range, spec.base_pitch_range);
    double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    m.pitch_contour[t] = sign * rng.uniform(spec.pitch_contour_min, spec.pitch_contour_max);
    m.base_energy[t] = rng.uniform(-1.0, 1.0);
    sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    m.energy_contour[t] = sign * rng.uniform(spec.energy_contour_min, spec.energy_contour_max);
    m.base_duration[t] = rng.uniform_int(spec.base_duration_min, spec.base_duration_max);
    for (int k = 0; k < d; ++k) {
      m.token_wave[static_cast<std::size_t>(t) * d + k] = rng.normal(0.0, 0.5);
      m.harmonic[static_cast<std::size_t>(t) * d + k] = rng.normal(0.0, 0.4);
    }
  }
  m.speaker_pitch_offset.resize(s);
  m.speaker_energy_offset.resize(s);
  m.speaker_timbre.resize(static_cast<std::size_t>(s) * d);
  for (int sp = 0; sp < s; ++sp) {
    m.speaker_pitch_offset[sp] =
        rng.uniform(-spec.speaker_pitch_offset_range, spec.speaker_pitch_offset_range);
    m.speaker_energy_offset[sp] =
        rng.uniform(-spec.speaker_energy_offset_range, spec.speaker_energy_offset_range);
    for (int k = 0; k < d; ++k)
      m.speaker_timbre[static_cast<std::size_t>(sp) * d + k] = rng.normal(0.0, spec.timbre_std);
  }
  return m;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  if (spec.n_test_speakers >= spec.n_speakers) {
    throw std::invalid_argument("corpus: n_test_speakers must leave at least one train speaker");
  }
  Corpus corpus;
  corpus.spec = spec;
  corpus.model = derive_corpus_model(spec);
  const CorpusModel& m = corpus.model;
  int d = spec.mel_dim;

  for (long u = 0; u < spec.n_utterances; ++u) {
    Rng rng = Rng::substream(spec.seed, "utterance", {static_cast<uint64_t>(u)});
    UtteranceRecord rec;
    rec.utterance_id = u;
    rec.mel_dim = d;
    rec.speaker_id = rng.uniform_int(0, spec.n_speakers - 1);
    int n = rng.uniform_int(spec.min_tokens, spec.max_tokens);
    double style = rng.normal(0.0, spec.style_std);
    rec.style = static_cast<float>(style);

    rec.token_ids.resize(n);
    rec.durations.resize(n);
    rec.pitch.resize(n);
    rec.energy.resize(n);
    long total_frames = 0;
    for (int i = 0; i < n; ++i) {
      int tok = rng.uniform_int(0, spec.vocab_size - 1);
      rec.token_ids[i] = tok;
      double pitch = m.base_pitch[tok] + m.speaker_pitch_offset[rec.speaker_id] +
                     style * m.pitch_contour[tok] + rng.normal(0.0, spec.noise_std);
      double energy = m.base_energy[tok] + m.speaker_energy_offset[rec.speaker_id] +
                      style * m.energy_contour[tok] + rng.normal(0.0, spec.noise_std);
      rec.pitch[i] = static_cast<float>(pitch);
      rec.energy[i] = static_cast<float>(energy);
      int dur = m.base_duration[tok] + static_cast<int>(std::lround(style));
      rec.durations[i] = std::max(1, dur);
      total_frames += rec.durations[i];
    }

    rec.n_frames = static_cast<int>(total_frames);
    rec.frames.resize(total_frames * static_cast<std::size_t>(d));
    std::size_t fo = 0;
    for (int i = 0; i < n; ++i) {
      int tok = rec.token_ids[i];
      for (int f = 0; f < rec.durations[i]; ++f) {
        for (int k = 0; k < d; ++k) {
          std::size_t td = static_cast<std::size_t>(tok) * d + k;
          double val = m.token_wave[td] +
                       m.speaker_timbre[static_cast<std::size_t>(rec.speaker_id) * d + k] +
                       static_cast<double>(rec.pitch[i]) * m.harmonic[td] +
                       rng.normal(0.0, spec.noise_std);
          rec.frames[fo++] = static_cast<float>(val);
        }
      }
    }

    std::ostringstream text;
    for (int i = 0; i < n; ++i) {
      if (i) text << ' ';
      text << token_word(rec.token_ids[i]);
    }
    if (rng.bernoulli(spec.digit_injection_p)) {
      text << ' ' << rng.uniform_int(0, 99);
    }
    rec.text = text.str();

    ++corpus.n_generated;
    if (filter_numerals(rec.text)) {
      corpus.records.push_back(std::move(rec));
    } else {
      ++corpus.n_dropped_by_filter;
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// line-delimited record format, versioned header "M2C1"
// ---------------------------------------------------------------------------

namespace {

template <typename Num, typename Fmt>
std::string join_nums(const std::vector<Num>& v, Fmt fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    out += fmt(v[i]);
  }
  return out;
}

std::string spec_line(const CorpusSpec& s) {
  std::ostringstream os;
  os << "spec vocab_size=" << s.vocab_size << " n_speakers=" << s.n_speakers
     << " n_test_speakers=" << s.n_test_speakers << " n_utterances=" << s.n_utterances
     << " min_tokens=" << s.min_tokens << " max_tokens=" << s.max_tokens
     << " mel_dim=" << s.mel_dim << " seed=" << s.seed << " style_std=" << fmt_double(s.style_std)
     << " noise_std=" << fmt_double(s.noise_std)
     << " digit_injection_p=" << fmt_double(s.digit_injection_p)
     << " base_pitch_range=" << fmt_double(s.base_pitch_range)
     << " pitch_contour_min=" << fmt_double(s.pitch_contour_min)
     << " pitch_contour_max=" << fmt_double(s.pitch_contour_max)
     << " energy_contour_min=" << fmt_double(s.energy_contour_min)
     << " energy_contour_max=" << fmt_double(s.energy_contour_max)
     << " base_duration_min=" << s.base_duration_min
     << " base_duration_max=" << s.base_duration_max
     << " speaker_pitch_offset_range=" << fmt_double(s.speaker_pitch_offset_range)
     << " speaker_energy_offset_range=" << fmt_double(s.speaker_energy_offset_range)
     << " timbre_std=" << fmt_double(s.timbre_std) << " n_generated=";
  return os.str();  // caller appends counters
}

void apply_spec_field(CorpusSpec& s, int& n_generated, const std::string& key,
                      const std::string& val, long line) {
  if (key == "vocab_size") s.vocab_size = parse_num<int>(val, line, key.c_str());
  else if (key == "n_speakers") s.n_speakers = parse_num<int>(val, line, key.c_str());
  else if (key == "n_test_speakers") s.n_test_speakers = parse_num<int>(val, line, key.c_str());
  else if (key == "n_utterances") s.n_utterances = parse_num<int>(val, line, key.c_str());
  else if (key == "min_tokens") s.min_tokens = parse_num<int>(val, line, key.c_str());
  else if (key == "max_tokens") s.max_tokens = parse_num<int>(val, line, key.c_str());
  else if (key == "mel_dim") s.mel_dim = parse_num<int>(val, line, key.c_str());
  else if (key == "seed") s.seed = parse_num<uint64_t>(val, line, key.c_str());
  else if (key == "style_std") s.style_std = parse_num<double>(val, line, key.c_str());
  else if (key == "noise_std") s.noise_std = parse_num<double>(val, line, key.c_str());
  else if (key == "digit_injection_p")
    s.digit_injection_p = parse_num<double>(val, line, key.c_str());
  else if (key == "base_pitch_range") s.base_pitch_range = parse_num<double>(val, line, key.c_str());
  else if (key == "pitch_contour_min")
    s.pitch_contour_min = parse_num<double>(val, line, key.c_str());
  else if (key == "pitch_contour_max")
    s.pitch_contour_max = parse_num<double>(val, line, key.c_str());
  else if (key == "energy_contour_min")
    s.energy_contour_min = parse_num<double>(val, line, key.c_str());
  else if (key == "energy_contour_max")
    s.energy_contour_max = parse_num<double>(val, line, key.c_str());
  else if (key == "base_duration_min")
    s.base_duration_min = parse_num<int>(val, line, key.c_str());
  else if (key == "base_duration_max")
    s.base_duration_max = parse_num<int>(val, line, key.c_str());
  else if (key == "speaker_pitch_offset_range")
    s.speaker_pitch_offset_range = parse_num<double>(val, line, key.c_str());
  else if (key == "speaker_energy_offset_range")
    s.speaker_energy_offset_range = parse_num<double>(val, line, key.c_str());
  else if (key == "timbre_std") s.timbre_std = parse_num<double>(val, line, key.c_str());
  else if (key == "n_generated") n_generated = parse_num<int>(val, line, key.c_str());
  else if (key == "n_dropped") { /* recomputed below */ }
  else throw DataError("corpus parse error at line " + std::to_string(line) +
                       ": unknown spec field '" + key + "'");
}

}  // namespace

void save_records(const Corpus& corpus, std::ostream& os) {
  os << "M2C1 v1\n";
  os << spec_line(corpus.spec) << corpus.n_generated << " n_dropped="
     << corpus.n_dropped_by_filter << "\n";
  for (const auto& r : corpus.records) {
    os << "utt id=" << r.utterance_id << "|spk=" << r.speaker_id
       << "|style=" << fmt_float(r.style) << "|tokens="
       << join_nums(r.token_ids, [](int v) { return std::to_string(v); }) << "|dur="
       << join_nums(r.durations, [](int v) { return std::to_string(v); }) << "|pitch="
       << join_nums(r.pitch, fmt_float) << "|energy=" << join_nums(r.energy, fmt_float)
       << "|text=" << r.text << "|frames=" << r.n_frames << ':' << r.mel_dim << ':'
       << base64_encode(reinterpret_cast<const unsigned char*>(r.frames.data()),
                        r.frames.size() * sizeof(float))
       << "\n";
  }
}

void save_records(const Corpus& corpus, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("corpus: cannot open '" + path + "' for writing");
  save_records(corpus, os);
}

Corpus load_records(std::istream& is) {
  std::string line;
  long lineno = 0;

  if (!std::getline(is, line)) throw DataError("corpus parse error at line 1: empty file");
  ++lineno;
  if (line != "M2C1 v1") {
    throw DataError("corpus parse error at line 1: bad header '" + line +
                    "' (expected 'M2C1 v1')");
  }

  Corpus corpus;
  if (!std::getline(is, line)) {
    throw DataError("corpus parse error at line 2: missing spec line");
  }
  ++lineno;
  {
    auto fields = split(line, ' ');
    if (fields.empty() || fields[0] != "spec") {
      throw DataError("corpus parse error at line 2: expected spec line");
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty()) continue;
      auto eq = fields[i].find('=');
      if (eq == std::string::npos) {
        throw DataError("corpus parse error at line 2: bad spec field '" + fields[i] + "'");
      }
      apply_spec_field(corpus.spec, corpus.n_generated, fields[i].substr(0, eq),
                       fields[i].substr(eq + 1), 2);
    }
  }
  corpus.model = derive_corpus_model(corpus.spec);

  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("utt ", 0) != 0) {
      throw DataError("corpus parse error at line " + std::to_string(lineno) +
                      ": expected 'utt ' record");
    }
    UtteranceRecord rec;
    bool saw_frames = false;
    for (const auto& field : split(line.substr(4), '|')) {
      auto eq = field.find('=');
      if (eq == std::string::npos) {
        throw DataError("corpus parse error at line " + std::to_string(lineno) +
                        ": field without '=': '" + field + "'");
      }
      std::string key = field.substr(0, eq);
      std::string val = field.substr(eq + 1);
      if (key == "id") rec.utterance_id = parse_num<long>(val, lineno, "id");
      else if (key == "spk") rec.speaker_id = parse_num<int>(val, lineno, "spk");
      else if (key == "style") rec.style = parse_num<float>(val, lineno, "style");
      else if (key == "tokens") {
        for (const auto& tok : split(val, ',')) rec.token_ids.push_back(parse_num<int>(tok, lineno, "token"));
      } else if (key == "dur") {
        for (const auto& tok : split(val, ',')) rec.durations.push_back(parse_num<int>(tok, lineno, "duration"));
      } else if (key == "pitch") {
        for (const auto& tok : split(val, ',')) rec.pitch.push_back(parse_num<float>(tok, lineno, "pitch"));
      } else if (key == "energy") {
        for (const auto& tok : split(val, ',')) rec.energy.push_back(parse_num<float>(tok, lineno, "energy"));
      } else if (key == "text") {
        rec.text = val;
      } else if (key == "frames") {
        auto parts = split(val, ':');
        if (parts.size() != 3) {
          throw DataError("corpus parse error at line " + std::to_string(lineno) +
                          ": frames field must be T:D:payload");
        }
        rec.n_frames = parse_num<int>(parts[0], lineno, "frame count");
        rec.mel_dim = parse_num<int>(parts[1], lineno, "mel dim");
        std::vector<unsigned char> raw;
        try {
          raw = base64_decode(parts[2]);
        } catch (const DataError& e) {
          throw DataError("corpus parse error at line " + std::to_string(lineno) + ": " +
                          e.what());
        }
        std::size_t expect = static_cast<std::size_t>(rec.n_frames) * rec.mel_dim * sizeof(float);
        if (raw.size() != expect) {
          throw DataError("corpus parse error at line " + std::to_string(lineno) +
                          ": frame payload holds " + std::to_string(raw.size()) +
                          " bytes, expected " + std::to_string(expect));
        }
        rec.frames.resize(static_cast<std::size_t>(rec.n_frames) * rec.mel_dim);
        std::memcpy(rec.frames.data(), raw.data(), raw.size());
        saw_frames = true;
      } else {
        throw DataError("corpus parse error at line " + std::to_string(lineno) +
                        ": unknown field '" + key + "'");
      }
    }
    if (!saw_frames || rec.token_ids.empty() ||
        rec.durations.size() != rec.token_ids.size() ||
        rec.pitch.size() != rec.token_ids.size() || rec.energy.size() != rec.token_ids.size()) {
      throw DataError("corpus parse error at line " + std::to_string(lineno) +
                      ": incomplete record");
    }
    long total = 0;
    for (int d : rec.durations) total += d;
    if (total != rec.n_frames) {
      throw DataError("corpus parse error at line " + std::to_string(lineno) + ": durations sum " +
                      std::to_string(total) + " != frame count " + std::to_string(rec.n_frames));
    }
    corpus.records.push_back(std::move(rec));
  }
  corpus.n_dropped_by_filter = corpus.n_generated - static_cast<int>(corpus.records.size());
  return corpus;
}

Corpus load_records(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("corpus: cannot open '" + path + "'");
  return load_records(is);
}

uint64_t corpus_hash(const Corpus& corpus) {
  std::ostringstream os;
  save_records(corpus, os);
  return fnv1a64(os.str());
}

}  // namespace m2gan
