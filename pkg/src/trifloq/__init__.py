"""Floquet theory for cooperative tridiagonal ODE systems.

Submodules
----------
signchain  -- integer sign-change count, its continuity domain, profiles
coeffs     -- tridiagonal coefficient samplers, sign transform, truncation
integrate  -- adaptive RK integration, fundamental matrices, nonlinear RHS
periodic   -- monodromy, Floquet multipliers/eigenvectors of periodic systems
bundles    -- Floquet solutions/spaces for general time dependence
spectrum   -- growth rates, exponential separation, Sacker-Sell estimates
skew       -- nonlinear systems as skew-product flows over torus bases
catalog    -- built-in example systems
cli        -- scenario-driven command line front end
"""

__version__ = "0.1.0"
