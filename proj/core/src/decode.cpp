#include "amt/decode.hpp"

#include <stdexcept>

namespace amt::decode {

template <typename S>
std::vector<NoteEvent> decode(const nn::Tensor<S>& onset, const nn::Tensor<S>& frame,
                              const data::InstrumentBank& bank, double threshold,
                              double hop_seconds) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("decode: threshold must lie in (0,1)");
  if (onset.rank() != 3 || frame.rank() != 3 || onset.dim(2) != 128 || frame.dim(2) != 129 ||
      onset.dim(0) != frame.dim(0) || onset.dim(1) != frame.dim(1))
    throw std::invalid_argument("decode: expected (T,J,128) onset and (T,J,129) frame rolls");
  const int64_t T = onset.dim(0), J = onset.dim(1);
  if (J != bank.size()) throw std::invalid_argument("decode: instrument count mismatch");
  const S thr = static_cast<S>(threshold);

  std::vector<NoteEvent> notes;
  for (int64_t j = 0; j < J; ++j) {
    const bool percussive = bank.at(static_cast<int>(j)).percussive;
    for (int64_t p = 0; p < 128; ++p) {
      auto on = [&](int64_t t) { return onset.at(t, j, p); };
      auto onset_fires = [&](int64_t t) {
        if (on(t) <= thr) return false;
        const bool rises = (t == 0) || on(t - 1) <= thr || on(t) > on(t - 1);
        const bool peaks = (t == T - 1) || on(t + 1) <= thr || on(t) >= on(t + 1);
        return rises && peaks;
      };
      int64_t t = 0;
      while (t < T) {
        if (!onset_fires(t)) {
          ++t;
          continue;
        }
        const int64_t start = t;
        if (percussive) {
          notes.push_back({static_cast<int>(j), static_cast<int>(p), start * hop_seconds,
                           (start + 1) * hop_seconds});
          ++t;
          continue;
        }
        int64_t end = start;  // first inactive (or re-onset) frame
        while (end < T && frame.at(end, j, p) > thr) {
          ++end;
          if (end < T && onset_fires(end)) break;  // a new note takes over
        }
        if (end == start) end = start + 1;  // onset without frame support: one hop
        notes.push_back({static_cast<int>(j), static_cast<int>(p), start * hop_seconds,
                         end * hop_seconds});
        t = end;
      }
    }
  }
  sort_notes(notes);
  return notes;
}

template std::vector<NoteEvent> decode<float>(const nn::Tensor<float>&, const nn::Tensor<float>&,
                                              const data::InstrumentBank&, double, double);
template std::vector<NoteEvent> decode<double>(const nn::Tensor<double>&,
                                               const nn::Tensor<double>&,
                                               const data::InstrumentBank&, double, double);

}  // namespace amt::decode
