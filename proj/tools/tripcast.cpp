#include <string>
#include <vector>

#include <tripcast/app.hpp>

int main(int argc, char** argv) {
    return tripcast::app::run(std::vector<std::string>(argv + 1, argv + argc));
}
