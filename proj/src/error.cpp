#include "dmis/error.hpp"

#include <exception>

namespace dmis {

int exit_code_for_current_exception() noexcept {
  try {
    throw;
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const NumericalError&) {
    return kExitNumerical;
  } catch (const GeometryError&) {
    return kExitNumerical;
  } catch (const std::out_of_range&) {
    return kExitConfig;
  } catch (const ArtifactError&) {
    return kExitMissingArtifact;
  } catch (...) {
    return kExitFailure;
  }
}

}  // namespace dmis
