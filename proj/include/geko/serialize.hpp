#ifndef GEKO_SERIALIZE_HPP
#define GEKO_SERIALIZE_HPP

#include "geko/koopman.hpp"
#include "geko/observables.hpp"

#include <string>

namespace geko {

// Structured text form of a lifting map (kind, parameters, centers, seed).
// Reloading reproduces every field bit-exactly.
std::string observable_to_string(const ObservableMap& map);
ObservableMap observable_from_string(const std::string& text);

// Structured text document bundling the fitted matrices as CSV blocks, the
// observable maps, and the fit diagnostics. Round-trips bit-exactly.
std::string model_to_string(const KoopmanModel& model);
KoopmanModel model_from_string(const std::string& text);

// File variants; malformed documents and I/O failures raise IoError.
void save_model(const KoopmanModel& model, const std::string& path);
KoopmanModel load_model(const std::string& path);

}  // namespace geko

#endif  // GEKO_SERIALIZE_HPP
